//! Catalog of time-dependent Hamiltonians and the run configuration that
//! selects one of them.
//!
//! | name                 | N   | H(t)                                                       |
//! |----------------------|-----|------------------------------------------------------------|
//! | `zero`               | any | 0                                                          |
//! | `static_diagonal`    | any | diag(d1, …, dN)                                            |
//! | `spin_half_rotating` | 2   | (ω0/2)σz + (ω1/2)(σx cos ωt + σy sin ωt)                   |
//! | `tripod_dark`        | 4   | Δ|e⟩⟨e| + Σ_j Ω_j(t)(|e⟩⟨g_j| + |g_j⟩⟨e|)                   |
//! | `random_smooth`      | any | A + B cos νt + C sin νt                                    |
//!
//! In the tripod the ground levels g1, g2, g3 are basis indices 0, 1, 2 and
//! the excited level e is index 3. Each Rabi amplitude is a truncated
//! Fourier series Ω_j(t) = r_j + Σ_n (c_jn cos nνt + s_jn sin nνt).
//!
//! `random_smooth` draws A, B, C as (G + G†)/2 from complex Gaussians G
//! produced by a ChaCha8 stream seeded with `seed_from_u64(seed)`, A first,
//! each matrix filled row by row with real part then imaginary part.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use toml::{Table, Value};

use crate::error::{ConfigError, Error, Result};
use crate::linalg::{
    c, hermitian_defect, matrix_exponential, random_hermitian, reorthonormalize, sigma_x, sigma_y,
    sigma_z, ComplexMatrix, Frame, HermitianMatrix, C64, I,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelName {
    Zero,
    StaticDiagonal,
    SpinHalfRotating,
    TripodDark,
    RandomSmooth,
}

impl ModelName {
    pub const ALL: [ModelName; 5] = [
        ModelName::Zero,
        ModelName::StaticDiagonal,
        ModelName::SpinHalfRotating,
        ModelName::TripodDark,
        ModelName::RandomSmooth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Zero => "zero",
            ModelName::StaticDiagonal => "static_diagonal",
            ModelName::SpinHalfRotating => "spin_half_rotating",
            ModelName::TripodDark => "tripod_dark",
            ModelName::RandomSmooth => "random_smooth",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// r + Σ_n (cos_n cos nνt + sin_n sin nνt), harmonics starting at n = 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FourierSeries {
    pub constant: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl FourierSeries {
    pub fn constant(value: f64) -> Self {
        Self {
            constant: value,
            ..Self::default()
        }
    }

    pub fn eval(&self, nu: f64, t: f64) -> f64 {
        let mut v = self.constant;
        for (n, a) in self.cos.iter().enumerate() {
            v += a * ((n + 1) as f64 * nu * t).cos();
        }
        for (n, b) in self.sin.iter().enumerate() {
            v += b * ((n + 1) as f64 * nu * t).sin();
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Zero,
    StaticDiagonal {
        diagonal: Vec<f64>,
    },
    SpinHalfRotating {
        omega0: f64,
        omega1: f64,
        omega: f64,
    },
    TripodDark {
        nu: f64,
        detuning: f64,
        rabi: [FourierSeries; 3],
    },
    RandomSmooth {
        nu: f64,
        a: HermitianMatrix,
        b: HermitianMatrix,
        c: HermitianMatrix,
    },
}

/// A Hamiltonian H(t) on C^N together with the initial subspace frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianModel {
    name: ModelName,
    dim: usize,
    params: BTreeMap<String, f64>,
    kind: Kind,
    initial_frame: Frame,
}

impl HamiltonianModel {
    pub fn zero(frame: Frame) -> Self {
        Self {
            name: ModelName::Zero,
            dim: frame.dim(),
            params: BTreeMap::new(),
            kind: Kind::Zero,
            initial_frame: frame,
        }
    }

    pub fn static_diagonal(diagonal: &[f64], frame: Frame) -> Result<Self> {
        check_frame_dim(&frame, diagonal.len())?;
        let params = diagonal
            .iter()
            .enumerate()
            .map(|(i, &d)| (format!("d{}", i + 1), d))
            .collect();
        Ok(Self {
            name: ModelName::StaticDiagonal,
            dim: diagonal.len(),
            params,
            kind: Kind::StaticDiagonal {
                diagonal: diagonal.to_vec(),
            },
            initial_frame: frame,
        })
    }

    pub fn spin_half_rotating(omega0: f64, omega1: f64, omega: f64, frame: Frame) -> Result<Self> {
        check_frame_dim(&frame, 2)?;
        let params = [("omega0", omega0), ("omega1", omega1), ("omega", omega)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Ok(Self {
            name: ModelName::SpinHalfRotating,
            dim: 2,
            params,
            kind: Kind::SpinHalfRotating {
                omega0,
                omega1,
                omega,
            },
            initial_frame: frame,
        })
    }

    /// Tripod with the two dark states of H(0) as the initial frame.
    pub fn tripod_dark(nu: f64, detuning: f64, rabi: [FourierSeries; 3]) -> Result<Self> {
        let mut params = BTreeMap::new();
        params.insert("nu".to_string(), nu);
        params.insert("delta".to_string(), detuning);
        for (j, series) in rabi.iter().enumerate() {
            params.insert(format!("rabi{}", j + 1), series.constant);
            for (n, v) in series.cos.iter().enumerate() {
                params.insert(format!("rabi{}_c{}", j + 1, n + 1), *v);
            }
            for (n, v) in series.sin.iter().enumerate() {
                params.insert(format!("rabi{}_s{}", j + 1, n + 1), *v);
            }
        }
        let amplitudes: [f64; 3] = std::array::from_fn(|j| rabi[j].eval(nu, 0.0));
        let frame = tripod_dark_states(amplitudes)?;
        Ok(Self {
            name: ModelName::TripodDark,
            dim: 4,
            params,
            kind: Kind::TripodDark { nu, detuning, rabi },
            initial_frame: frame,
        })
    }

    /// Seeded random smooth Hamiltonian; A, B, C are scaled by `scale`.
    pub fn random_smooth(dim: usize, seed: u64, nu: f64, scale: f64, frame: Frame) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw =
            || HermitianMatrix::symmetrized(random_hermitian(dim, &mut rng).scale(scale));
        let (a, b, cm) = (draw(), draw(), draw());
        Self::random_smooth_from(seed, nu, scale, a, b, cm, frame)
    }

    fn random_smooth_from(
        seed: u64,
        nu: f64,
        scale: f64,
        a: HermitianMatrix,
        b: HermitianMatrix,
        cm: HermitianMatrix,
        frame: Frame,
    ) -> Result<Self> {
        let dim = a.dim();
        check_frame_dim(&frame, dim)?;
        let params = [("seed", seed as f64), ("nu", nu), ("scale", scale)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Ok(Self {
            name: ModelName::RandomSmooth,
            dim,
            params,
            kind: Kind::RandomSmooth { nu, a, b, c: cm },
            initial_frame: frame,
        })
    }

    /// Same Hamiltonian, different initial frame.
    pub fn with_frame(&self, frame: Frame) -> Result<Self> {
        check_frame_dim(&frame, self.dim)?;
        Ok(Self {
            initial_frame: frame,
            ..self.clone()
        })
    }

    pub fn name(&self) -> ModelName {
        self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.initial_frame.rank()
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn initial_frame(&self) -> &Frame {
        &self.initial_frame
    }

    /// H(t).
    pub fn hamiltonian_at(&self, t: f64) -> Result<HermitianMatrix> {
        if !t.is_finite() {
            return Err(Error::NonFiniteTime(t));
        }
        let n = self.dim;
        let h = match &self.kind {
            Kind::Zero => ComplexMatrix::zeros(n, n),
            Kind::StaticDiagonal { diagonal } => {
                HermitianMatrix::from_real_diagonal(diagonal).into_inner()
            }
            Kind::SpinHalfRotating {
                omega0,
                omega1,
                omega,
            } => {
                sigma_z().scale(omega0 / 2.0)
                    + (sigma_x().scale((omega * t).cos()) + sigma_y().scale((omega * t).sin()))
                        .scale(omega1 / 2.0)
            }
            Kind::TripodDark { nu, detuning, rabi } => {
                let mut h = ComplexMatrix::zeros(4, 4);
                h[(3, 3)] = c(*detuning, 0.0);
                for (j, series) in rabi.iter().enumerate() {
                    let amp = c(series.eval(*nu, t), 0.0);
                    h[(3, j)] = amp;
                    h[(j, 3)] = amp;
                }
                h
            }
            Kind::RandomSmooth { nu, a, b, c: cm } => {
                a.as_matrix()
                    + b.as_matrix().scale((nu * t).cos())
                    + cm.as_matrix().scale((nu * t).sin())
            }
        };
        Ok(HermitianMatrix::symmetrized(h))
    }

    /// Closed-form full-space propagator U(t, 0), where one exists.
    ///
    /// For `spin_half_rotating` this is the rotating-frame solution
    /// U(t) = e^{−iωtσz/2} · e^{−i[(ω0−ω)σz/2 + ω1σx/2]t}.
    pub fn reference_propagator(&self, t: f64) -> Result<Option<ComplexMatrix>> {
        if !t.is_finite() {
            return Err(Error::NonFiniteTime(t));
        }
        let n = self.dim;
        let u = match &self.kind {
            Kind::Zero => ComplexMatrix::identity(n, n),
            Kind::StaticDiagonal { diagonal } => ComplexMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    c(0.0, -diagonal[i] * t).exp()
                } else {
                    c(0.0, 0.0)
                }
            }),
            Kind::SpinHalfRotating {
                omega0,
                omega1,
                omega,
            } => {
                let frame_rotation = ComplexMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        c(0.0, -omega * t / 2.0).exp(),
                        c(0.0, 0.0),
                        c(0.0, 0.0),
                        c(0.0, omega * t / 2.0).exp(),
                    ],
                );
                let rotating_h =
                    sigma_z().scale((omega0 - omega) / 2.0) + sigma_x().scale(omega1 / 2.0);
                frame_rotation * matrix_exponential(&(rotating_h * (-I * t)))?
            }
            Kind::TripodDark { .. } | Kind::RandomSmooth { .. } => return Ok(None),
        };
        Ok(Some(u))
    }
}

fn check_frame_dim(frame: &Frame, dim: usize) -> Result<()> {
    if frame.dim() == dim {
        Ok(())
    } else {
        Err(Error::Dimension {
            op: "HamiltonianModel",
            detail: format!("frame lives in C^{} but the model in C^{dim}", frame.dim()),
        })
    }
}

/// Orthonormal basis of the ground-manifold vectors annihilated by the
/// tripod coupling with amplitudes Ω, embedded in C⁴.
fn tripod_dark_states(amplitudes: [f64; 3]) -> Result<Frame> {
    let norm = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(Error::Degenerate {
            smallest: norm,
            threshold: 1e-12,
        });
    }
    let omega_hat: Vec<f64> = amplitudes.iter().map(|a| a / norm).collect();
    // Q = 1 − ω̂ω̂ᵀ has eigenvalues {0, 1, 1}; its unit eigenspace is dark.
    let q = ComplexMatrix::from_fn(3, 3, |i, j| {
        c(
            f64::from(u8::from(i == j)) - omega_hat[i] * omega_hat[j],
            0.0,
        )
    });
    let eig = SymmetricEigen::new(q);
    let mut cols: Vec<usize> = (0..3).collect();
    cols.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut dark = ComplexMatrix::zeros(4, 2);
    for (k, &col) in cols[..2].iter().enumerate() {
        for i in 0..3 {
            dark[(i, k)] = eig.eigenvectors[(i, col)];
        }
    }
    reorthonormalize(&dark)
}

/// Threshold that is either fixed or decided by a convergence-order fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Algebraic identities that hold up to rounding.
    pub identity: f64,
    pub ode: Threshold,
    pub factorization: Threshold,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-12,
            ode: Threshold::Auto,
            factorization: Threshold::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    /// Replace each partial holonomy product by its polar isometry factor.
    pub repolarize_holonomy: bool,
    /// Test hook: build the holonomy product with earlier times on the left.
    pub reverse_holonomy_order: bool,
    /// Test hook: build the dynamic product with later times on the left.
    pub reverse_dynamic_order: bool,
}

pub const DEFAULT_REORTHONORMALIZE_EVERY: usize = 50;

/// A fully validated run: model, grid and check settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub model: HamiltonianModel,
    pub t_final: f64,
    pub steps: usize,
    pub tolerances: Tolerances,
    pub flags: Flags,
    pub reorthonormalize_every: usize,
    /// Seed actually used by seeded models, after any override.
    pub seed: Option<u64>,
}

impl ModelConfig {
    pub fn new(model: HamiltonianModel, t_final: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(ConfigError::Steps(0).into());
        }
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(ConfigError::TFinal(t_final).into());
        }
        let seed = model.params.get("seed").map(|&s| s as u64);
        Ok(Self {
            model,
            t_final,
            steps,
            tolerances: Tolerances::default(),
            flags: Flags::default(),
            reorthonormalize_every: DEFAULT_REORTHONORMALIZE_EVERY,
            seed,
        })
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        Self {
            steps,
            ..self.clone()
        }
    }

    pub fn with_model(&self, model: HamiltonianModel) -> Self {
        Self {
            model,
            ..self.clone()
        }
    }

    pub fn with_flags(&self, flags: Flags) -> Self {
        Self {
            flags,
            ..self.clone()
        }
    }
}

/// Parses and validates a TOML run configuration.
///
/// ```toml
/// [model]
/// name = "spin_half_rotating"
/// frame = [0]
/// params = { omega0 = 1.0, omega1 = 0.3, omega = 1.0 }
///
/// [run]
/// t_final = 2.0
/// steps = 500
/// ```
pub fn parse_config(text: &str) -> Result<ModelConfig, ConfigError> {
    parse_config_with_seed(text, None)
}

/// As [`parse_config`], with `seed_override` replacing `model.params.seed`.
pub fn parse_config_with_seed(
    text: &str,
    seed_override: Option<u64>,
) -> Result<ModelConfig, ConfigError> {
    let doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let model_tbl = table(&doc, "model")?;
    let run_tbl = table(&doc, "run")?;

    let name_str = string(model_tbl, "model.name", "name")?;
    let name = ModelName::parse(name_str)
        .ok_or_else(|| ConfigError::UnknownModel(name_str.to_string()))?;

    let params = match model_tbl.get("params") {
        None => BTreeMap::new(),
        Some(Value::Table(t)) => {
            let mut out = BTreeMap::new();
            for (k, v) in t {
                out.insert(k.clone(), number(v, &format!("model.params.{k}"))?);
            }
            out
        }
        Some(_) => return Err(wrong_type("model.params", "table")),
    };

    let fixed_dim = match name {
        ModelName::SpinHalfRotating => Some(2),
        ModelName::TripodDark => Some(4),
        _ => None,
    };
    let dim = match (model_tbl.get("dim"), fixed_dim) {
        (None, Some(d)) => d,
        (None, None) => return Err(ConfigError::MissingKey("model.dim".into())),
        (Some(v), fixed) => {
            let d = integer(v, "model.dim")?;
            if d < 1 {
                return Err(invalid("model.dim", "must be ≥ 1"));
            }
            let d = d as usize;
            if let Some(f) = fixed {
                if f != d {
                    return Err(invalid("model.dim", &format!("{name} requires dim = {f}")));
                }
            }
            d
        }
    };

    let frame = match model_tbl.get("frame") {
        Some(v) => Some(parse_frame(v, dim)?),
        None if name == ModelName::TripodDark => None,
        None => return Err(ConfigError::MissingKey("model.frame".into())),
    };

    let require = |key: &str| -> Result<f64, ConfigError> {
        params
            .get(key)
            .copied()
            .ok_or(ConfigError::MissingParameter {
                model: name.as_str(),
                name: key.to_string(),
            })
    };

    let lift = |e: Error| match e {
        Error::Config(ce) => ce,
        other => invalid("model", &other.to_string()),
    };

    let mut seed = None;
    let model = match name {
        ModelName::Zero => HamiltonianModel::zero(frame.expect("frame required")),
        ModelName::StaticDiagonal => {
            let d = (1..=dim)
                .map(|i| require(&format!("d{i}")))
                .collect::<Result<Vec<_>, _>>()?;
            HamiltonianModel::static_diagonal(&d, frame.expect("frame required")).map_err(lift)?
        }
        ModelName::SpinHalfRotating => HamiltonianModel::spin_half_rotating(
            require("omega0")?,
            require("omega1")?,
            require("omega")?,
            frame.expect("frame required"),
        )
        .map_err(lift)?,
        ModelName::TripodDark => {
            let nu = require("nu")?;
            let detuning = params.get("delta").copied().unwrap_or(0.0);
            let mut rabi: [FourierSeries; 3] = Default::default();
            for (j, series) in rabi.iter_mut().enumerate() {
                let prefix = format!("rabi{}", j + 1);
                series.constant = require(&prefix)?;
                series.cos = harmonics(&params, &format!("{prefix}_c"));
                series.sin = harmonics(&params, &format!("{prefix}_s"));
            }
            let base = HamiltonianModel::tripod_dark(nu, detuning, rabi).map_err(|e| match e {
                Error::Degenerate { .. } => ConfigError::InvalidValue {
                    key: "model.params".into(),
                    reason: "tripod Rabi amplitudes vanish at t = 0, dark subspace undefined"
                        .into(),
                },
                other => lift(other),
            })?;
            match frame {
                Some(f) => base.with_frame(f).map_err(lift)?,
                None => base,
            }
        }
        ModelName::RandomSmooth => {
            let s = match seed_override {
                Some(s) => s,
                None => {
                    let raw = require("seed")?;
                    if !(raw >= 0.0 && raw.fract() == 0.0 && raw < 2f64.powi(53)) {
                        return Err(invalid(
                            "model.params.seed",
                            "must be a non-negative integer",
                        ));
                    }
                    raw as u64
                }
            };
            seed = Some(s);
            let nu = require("nu")?;
            let scale = params.get("scale").copied().unwrap_or(1.0);
            let frame = frame.expect("frame required");
            let explicit = match model_tbl.get("matrices") {
                Some(Value::Table(t)) => Some(t),
                Some(_) => return Err(wrong_type("model.matrices", "table")),
                None => None,
            };
            let base =
                HamiltonianModel::random_smooth(dim, s, nu, scale, frame.clone()).map_err(lift)?;
            match explicit {
                None => base,
                Some(t) => {
                    let Kind::RandomSmooth { a, b, c: cm, .. } = base.kind else {
                        unreachable!("random_smooth builds a random_smooth kind")
                    };
                    let pick = |key: &str, fallback: HermitianMatrix| match t.get(key) {
                        Some(v) => parse_hermitian(v, dim, &format!("model.matrices.{key}")),
                        None => Ok(fallback),
                    };
                    HamiltonianModel::random_smooth_from(
                        s,
                        nu,
                        scale,
                        pick("a", a)?,
                        pick("b", b)?,
                        pick("c", cm)?,
                        frame,
                    )
                    .map_err(lift)?
                }
            }
        }
    };

    let t_final = match run_tbl.get("t_final") {
        Some(v) => number(v, "run.t_final")?,
        None => return Err(ConfigError::MissingKey("run.t_final".into())),
    };
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(ConfigError::TFinal(t_final));
    }
    let steps = match run_tbl.get("steps") {
        Some(v) => integer(v, "run.steps")?,
        None => return Err(ConfigError::MissingKey("run.steps".into())),
    };
    if steps < 1 {
        return Err(ConfigError::Steps(steps));
    }

    let mut tolerances = Tolerances::default();
    if let Some(v) = run_tbl.get("tolerances") {
        let Value::Table(t) = v else {
            return Err(wrong_type("run.tolerances", "table"));
        };
        for (k, v) in t {
            let key = format!("run.tolerances.{k}");
            match k.as_str() {
                "identity" => tolerances.identity = positive(v, &key)?,
                "ode" => tolerances.ode = threshold(v, &key)?,
                "factorization" => tolerances.factorization = threshold(v, &key)?,
                _ => return Err(invalid(&key, "unknown tolerance")),
            }
        }
    }

    let mut flags = Flags::default();
    if let Some(v) = run_tbl.get("flags") {
        let Value::Table(t) = v else {
            return Err(wrong_type("run.flags", "table"));
        };
        for (k, v) in t {
            let key = format!("run.flags.{k}");
            let Value::Boolean(b) = v else {
                return Err(wrong_type(&key, "boolean"));
            };
            match k.as_str() {
                "repolarize_holonomy" => flags.repolarize_holonomy = *b,
                "reverse_holonomy_order" => flags.reverse_holonomy_order = *b,
                "reverse_dynamic_order" => flags.reverse_dynamic_order = *b,
                _ => return Err(invalid(&key, "unknown flag")),
            }
        }
    }

    let reorthonormalize_every = match run_tbl.get("reorthonormalize_every") {
        None => DEFAULT_REORTHONORMALIZE_EVERY,
        Some(v) => {
            let k = integer(v, "run.reorthonormalize_every")?;
            if k < 1 {
                return Err(invalid("run.reorthonormalize_every", "must be ≥ 1"));
            }
            k as usize
        }
    };

    Ok(ModelConfig {
        model,
        t_final,
        steps: steps as usize,
        tolerances,
        flags,
        reorthonormalize_every,
        seed,
    })
}

fn harmonics(params: &BTreeMap<String, f64>, prefix: &str) -> Vec<f64> {
    let max_n = params
        .keys()
        .filter_map(|k| k.strip_prefix(prefix)?.parse::<usize>().ok())
        .max()
        .unwrap_or(0);
    (1..=max_n)
        .map(|n| params.get(&format!("{prefix}{n}")).copied().unwrap_or(0.0))
        .collect()
}

fn table<'a>(doc: &'a Table, key: &str) -> Result<&'a Table, ConfigError> {
    match doc.get(key) {
        Some(Value::Table(t)) => Ok(t),
        Some(_) => Err(wrong_type(key, "table")),
        None => Err(ConfigError::MissingKey(key.into())),
    }
}

fn string<'a>(t: &'a Table, full: &str, key: &str) -> Result<&'a str, ConfigError> {
    match t.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(wrong_type(full, "string")),
        None => Err(ConfigError::MissingKey(full.into())),
    }
}

fn number(v: &Value, key: &str) -> Result<f64, ConfigError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(wrong_type(key, "number")),
    }
}

fn integer(v: &Value, key: &str) -> Result<i64, ConfigError> {
    match v {
        Value::Integer(i) => Ok(*i),
        Value::Float(f) if f.fract() == 0.0 && f.is_finite() => Ok(*f as i64),
        _ => Err(wrong_type(key, "integer")),
    }
}

fn positive(v: &Value, key: &str) -> Result<f64, ConfigError> {
    let x = number(v, key)?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(ConfigError::Tolerance {
            key: key.into(),
            value: x,
        })
    }
}

fn threshold(v: &Value, key: &str) -> Result<Threshold, ConfigError> {
    match v {
        Value::String(s) if s == "auto" => Ok(Threshold::Auto),
        Value::String(_) => Err(invalid(key, "expected \"auto\" or a positive number")),
        other => positive(other, key).map(Threshold::Fixed),
    }
}

fn complex_entry(v: &Value, key: &str) -> Result<C64, ConfigError> {
    match v {
        Value::Array(pair) if pair.len() == 2 => {
            Ok(c(number(&pair[0], key)?, number(&pair[1], key)?))
        }
        _ => Err(wrong_type(key, "[re, im] pair")),
    }
}

fn parse_frame(v: &Value, dim: usize) -> Result<Frame, ConfigError> {
    const KEY: &str = "model.frame";
    let Value::Array(items) = v else {
        return Err(wrong_type(KEY, "array"));
    };
    if items.is_empty() {
        return Err(invalid(KEY, "frame must contain at least one column"));
    }
    let not_orthonormal = |reason: String| ConfigError::FrameNotOrthonormalizable {
        key: KEY.into(),
        reason,
    };
    if items.iter().all(|x| matches!(x, Value::Integer(_))) {
        let mut indices = Vec::with_capacity(items.len());
        for x in items {
            let i = integer(x, KEY)?;
            if i < 0 || i as usize >= dim {
                return Err(invalid(
                    KEY,
                    &format!("basis index {i} out of range for dim {dim}"),
                ));
            }
            indices.push(i as usize);
        }
        return Frame::basis(dim, &indices).map_err(|e| not_orthonormal(e.to_string()));
    }
    let mut m = ComplexMatrix::zeros(dim, items.len());
    for (j, col) in items.iter().enumerate() {
        let Value::Array(entries) = col else {
            return Err(wrong_type(
                KEY,
                "list of basis indices or list of complex vectors",
            ));
        };
        if entries.len() != dim {
            return Err(invalid(
                KEY,
                &format!("column {j} has {} entries, expected {dim}", entries.len()),
            ));
        }
        for (i, e) in entries.iter().enumerate() {
            m[(i, j)] = complex_entry(e, KEY)?;
        }
    }
    if items.len() > dim {
        return Err(not_orthonormal(format!(
            "{} columns in C^{dim}",
            items.len()
        )));
    }
    reorthonormalize(&m).map_err(|e| not_orthonormal(e.to_string()))
}

fn parse_hermitian(v: &Value, dim: usize, key: &str) -> Result<HermitianMatrix, ConfigError> {
    let Value::Array(rows) = v else {
        return Err(wrong_type(key, "array of rows"));
    };
    if rows.len() != dim {
        return Err(invalid(key, &format!("expected {dim} rows")));
    }
    let mut m = ComplexMatrix::zeros(dim, dim);
    for (i, row) in rows.iter().enumerate() {
        let Value::Array(entries) = row else {
            return Err(wrong_type(key, "array of rows"));
        };
        if entries.len() != dim {
            return Err(invalid(key, &format!("row {i} must have {dim} entries")));
        }
        for (j, e) in entries.iter().enumerate() {
            m[(i, j)] = complex_entry(e, key)?;
        }
    }
    let defect = hermitian_defect(&m);
    HermitianMatrix::new(m).map_err(|_| ConfigError::NonHermitianMatrix {
        key: key.into(),
        defect,
    })
}

fn wrong_type(key: &str, expected: &'static str) -> ConfigError {
    ConfigError::WrongType {
        key: key.into(),
        expected,
    }
}

fn invalid(key: &str, reason: &str) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.into(),
        reason: reason.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frob;
    use std::f64::consts::PI;

    const MINIMAL: &str = r#"
        [model]
        name = "zero"
        dim = 2
        frame = [0]

        [run]
        t_final = 1
        steps = 10
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.model.name(), ModelName::Zero);
        assert_eq!(cfg.steps, 10);
        assert_eq!(cfg.t_final, 1.0);
        assert_eq!(cfg.tolerances.identity, 1e-12);
        assert_eq!(cfg.tolerances.ode, Threshold::Auto);
        assert!(!cfg.flags.repolarize_holonomy);
        assert_eq!(cfg.reorthonormalize_every, 50);
    }

    #[test]
    fn zero_steps_is_rejected() {
        let err = parse_config(&MINIMAL.replace("steps = 10", "steps = 0")).unwrap_err();
        assert_eq!(err, ConfigError::Steps(0));
        assert!(err.to_string().contains("steps must be ≥ 1"));
    }

    #[test]
    fn spin_half_without_omega_names_it() {
        let text = r#"
            [model]
            name = "spin_half_rotating"
            frame = [0]
            params = { omega0 = 1.0, omega1 = 0.3 }
            [run]
            t_final = 1.0
            steps = 10
        "#;
        let err = parse_config(text).unwrap_err();
        assert_eq!(
            err,
            ConfigError::MissingParameter {
                model: "spin_half_rotating",
                name: "omega".into()
            }
        );
    }

    #[test]
    fn validation_errors_are_distinct() {
        let unknown = parse_config(&MINIMAL.replace("\"zero\"", "\"harmonic\"")).unwrap_err();
        assert_eq!(unknown, ConfigError::UnknownModel("harmonic".into()));

        let parallel = MINIMAL.replace(
            "frame = [0]",
            "frame = [[[1, 0], [0, 0]], [[2, 0], [0, 0]]]",
        );
        assert!(matches!(
            parse_config(&parallel).unwrap_err(),
            ConfigError::FrameNotOrthonormalizable { .. }
        ));

        let non_herm = r#"
            [model]
            name = "random_smooth"
            dim = 2
            frame = [0]
            params = { seed = 1, nu = 1.0 }
            [model.matrices]
            a = [[[0, 0], [1, 0]], [[0, 0], [0, 0]]]
            [run]
            t_final = 1.0
            steps = 10
        "#;
        assert!(matches!(
            parse_config(non_herm).unwrap_err(),
            ConfigError::NonHermitianMatrix { .. }
        ));
    }

    #[test]
    fn tolerance_table_parses() {
        let text = r#"
            [model]
            name = "zero"
            dim = 2
            frame = [0]
            [run]
            t_final = 1.0
            steps = 4
            tolerances = { identity = 1e-11, ode = "auto", factorization = 1e-6 }
            flags = { repolarize_holonomy = true }
        "#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.tolerances.identity, 1e-11);
        assert_eq!(cfg.tolerances.factorization, Threshold::Fixed(1e-6));
        assert!(cfg.flags.repolarize_holonomy);

        let neg = text.replace("identity = 1e-11", "identity = -1.0");
        assert!(matches!(
            parse_config(&neg).unwrap_err(),
            ConfigError::Tolerance { .. }
        ));
    }

    #[test]
    fn explicit_complex_frame_is_orthonormalized() {
        let text = r#"
            [model]
            name = "zero"
            dim = 2
            frame = [[[0.5, 0.0], [0.0, 0.5]]]
            [run]
            t_final = 1.0
            steps = 2
        "#;
        let cfg = parse_config(text).unwrap();
        let f = cfg.model.initial_frame();
        assert!(f.gram_defect() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((f.columns()[(1, 0)] - c(0.0, s)).norm() < 1e-15);
    }

    #[test]
    fn zero_and_spin_half_hamiltonians() {
        let zero = HamiltonianModel::zero(Frame::basis(3, &[0]).unwrap());
        assert_eq!(frob(&zero.hamiltonian_at(2.5).unwrap()), 0.0);

        let spin =
            HamiltonianModel::spin_half_rotating(1.0, 0.0, 0.7, Frame::basis(2, &[0]).unwrap())
                .unwrap();
        let h = spin.hamiltonian_at(0.0).unwrap();
        let expect = HermitianMatrix::from_real_diagonal(&[0.5, -0.5]);
        assert_eq!(h, expect);
        assert!(spin.hamiltonian_at(f64::NAN).is_err());
    }

    #[test]
    fn random_smooth_is_periodic_and_deterministic() {
        let f = Frame::basis(4, &[0, 1]).unwrap();
        let m = HamiltonianModel::random_smooth(4, 42, 1.3, 1.0, f.clone()).unwrap();
        let period = 2.0 * PI / 1.3;
        let t = 0.37;
        let d = frob(
            &(m.hamiltonian_at(t).unwrap().into_inner()
                - m.hamiltonian_at(t + period).unwrap().into_inner()),
        );
        assert!(d < 1e-13);

        let again = HamiltonianModel::random_smooth(4, 42, 1.3, 1.0, f).unwrap();
        assert_eq!(
            m.hamiltonian_at(t).unwrap(),
            again.hamiltonian_at(t).unwrap()
        );
    }

    #[test]
    fn reference_propagators() {
        let zero = HamiltonianModel::zero(Frame::basis(2, &[0]).unwrap());
        assert_eq!(
            zero.reference_propagator(3.0).unwrap().unwrap(),
            ComplexMatrix::identity(2, 2)
        );

        let diag =
            HamiltonianModel::static_diagonal(&[1.0, 2.0], Frame::basis(2, &[0]).unwrap()).unwrap();
        let u = diag.reference_propagator(PI).unwrap().unwrap();
        let expect = HermitianMatrix::from_real_diagonal(&[-1.0, 1.0]).into_inner();
        assert!(frob(&(u - expect)) < 1e-14);

        let tripod = HamiltonianModel::tripod_dark(
            1.0,
            0.0,
            [
                FourierSeries::constant(1.0),
                FourierSeries::constant(0.5),
                FourierSeries::constant(0.2),
            ],
        )
        .unwrap();
        assert!(tripod.reference_propagator(1.0).unwrap().is_none());
    }

    #[test]
    fn tripod_dark_states_are_dark() {
        let tripod = HamiltonianModel::tripod_dark(
            0.8,
            0.3,
            [
                FourierSeries {
                    constant: 1.0,
                    cos: vec![0.2],
                    sin: vec![],
                },
                FourierSeries::constant(0.5),
                FourierSeries {
                    constant: 0.2,
                    cos: vec![],
                    sin: vec![0.4],
                },
            ],
        )
        .unwrap();
        let f = tripod.initial_frame();
        assert_eq!(f.rank(), 2);
        assert!(f.gram_defect() < 1e-14);
        let h0 = tripod.hamiltonian_at(0.0).unwrap();
        assert!(frob(&(h0.as_matrix() * f.columns())) < 1e-14);
        // no excited-state population
        assert!(f.columns().row(3).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn tripod_with_vanishing_amplitudes_is_rejected() {
        let text = r#"
            [model]
            name = "tripod_dark"
            params = { nu = 1.0, rabi1 = 0.0, rabi2 = 0.0, rabi3 = 0.0 }
            [run]
            t_final = 1.0
            steps = 10
        "#;
        assert!(matches!(
            parse_config(text).unwrap_err(),
            ConfigError::InvalidValue { .. }
        ));
    }

    #[test]
    fn seed_override_replaces_config_seed() {
        let text = r#"
            [model]
            name = "random_smooth"
            dim = 3
            frame = [0]
            params = { seed = 5, nu = 1.0 }
            [run]
            t_final = 1.0
            steps = 10
        "#;
        let a = parse_config(text).unwrap();
        let b = parse_config_with_seed(text, Some(6)).unwrap();
        assert_eq!(a.seed, Some(5));
        assert_eq!(b.seed, Some(6));
        assert_ne!(
            a.model.hamiltonian_at(0.1).unwrap(),
            b.model.hamiltonian_at(0.1).unwrap()
        );
    }
}
