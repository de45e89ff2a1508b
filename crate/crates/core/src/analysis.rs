//! End-to-end pipeline on one grid, and step-halving studies across grids.

use std::thread;

use crate::convergence::{fitted_order, FittedOrder};
use crate::decomposition::{
    circularity_equivalence, dynamic_ode_residuals, dynamic_partials, holonomy_ode_residuals,
    holonomy_partials, identity_residuals, max_anti_hermitian_defect, verify_ode,
    DecompositionResult, GeneratorRoute, ProductOrder,
};
use crate::error::Result;
use crate::linalg::{frob, hermitian_defect, isometry_defect, ComplexMatrix, PartialIsometry};
use crate::models::ModelConfig;
use crate::propagation::{evolution_operator, evolve_frames, Trajectory};

/// Everything measured on a single trajectory.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub trajectory: Trajectory,
    pub decomposition: DecompositionResult,
    /// Residual of Ẇ = ṖW along the holonomy product as configured.
    pub holonomy_ode: Vec<f64>,
    /// Residual of Ḋ = DF along the dynamic product as configured.
    pub dynamic_ode: Vec<f64>,
    /// max over nodes of ‖F + F†‖_F
    pub anti_hermitian_max: f64,
    /// ‖P(0)·D·P(0) − D‖_F
    pub dynamic_support: f64,
    /// ‖P(t_M)·W − W‖_F
    pub holonomy_intertwining: f64,
    /// max over nodes of the two components of isometry_defect(U, P(0), P(t))
    pub evolution_isometry_max: (f64, f64),
    /// max over nodes of (‖P(t)U − U‖_F, ‖U P(0) − U‖_F)
    pub evolution_intertwining_max: (f64, f64),
    pub norm_drift_max: f64,
    pub gram_defect_max: f64,
    /// max over nodes of ‖Ṗ − Ṗ†‖_F and |tr Ṗ|
    pub pdot_hermitian_max: f64,
    pub pdot_trace_max: f64,
}

impl Analysis {
    pub fn dt(&self) -> f64 {
        self.trajectory.dt()
    }

    pub fn ode_max(&self) -> f64 {
        max(&self.decomposition.residual_ode)
    }

    pub fn identity_max(&self) -> f64 {
        max(&self.decomposition.residual_identity)
    }

    /// U(t_k, 0) at every node.
    pub fn evolution_operators(&self) -> Vec<ComplexMatrix> {
        (0..=self.trajectory.steps())
            .map(|k| {
                evolution_operator(&self.trajectory, k)
                    .expect("index in range")
                    .matrix
            })
            .collect()
    }
}

pub(crate) fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

/// Runs propagation and decomposition on the grid of `config`.
pub fn analyze(config: &ModelConfig) -> Result<Analysis> {
    let traj = evolve_frames(&config.model, config)?;
    analyze_trajectory(traj, config)
}

pub fn analyze_trajectory(traj: Trajectory, config: &ModelConfig) -> Result<Analysis> {
    let flags = &config.flags;
    let hol = holonomy_partials(
        &traj,
        ProductOrder::from_flag(flags.reverse_holonomy_order),
        flags.repolarize_holonomy,
    )?;
    let dyn_order = ProductOrder::from_flag(flags.reverse_dynamic_order);
    let dynp = dynamic_partials(&traj, GeneratorRoute::Coupling, dyn_order)?;

    let first = traj.initial();
    let last = traj.last();
    let p0 = first.p.as_matrix();
    let w = hol.last().expect("nonempty").clone();
    let d = dynp.last().expect("nonempty").clone();
    let product = &w * &d;
    let u_final = evolution_operator(&traj, traj.steps())?;

    let holonomy = PartialIsometry {
        matrix: w,
        source_projector: first.p.clone(),
        target_projector: last.p.clone(),
    };
    let isometry_defect_holonomy = holonomy.defect();
    let has_interior = traj.steps() >= 2;

    let mut evolution_isometry_max = (0.0f64, 0.0f64);
    let mut evolution_intertwining_max = (0.0f64, 0.0f64);
    let mut norm_drift_max = 0.0f64;
    let mut gram_defect_max = 0.0f64;
    let mut pdot_hermitian_max = 0.0f64;
    let mut pdot_trace_max = 0.0f64;
    for (k, node) in traj.nodes().iter().enumerate() {
        let u = evolution_operator(&traj, k)?;
        let (a, b) = isometry_defect(&u.matrix, &first.p, &node.p)?;
        evolution_isometry_max = (
            evolution_isometry_max.0.max(a),
            evolution_isometry_max.1.max(b),
        );
        let left = frob(&(node.p.as_matrix() * &u.matrix - &u.matrix));
        let right = frob(&(&u.matrix * p0 - &u.matrix));
        evolution_intertwining_max = (
            evolution_intertwining_max.0.max(left),
            evolution_intertwining_max.1.max(right),
        );
        norm_drift_max = norm_drift_max.max(node.norm_drift);
        gram_defect_max = gram_defect_max.max(node.frame.gram_defect());
        pdot_hermitian_max = pdot_hermitian_max.max(hermitian_defect(&node.pdot));
        pdot_trace_max = pdot_trace_max.max(node.pdot.trace().norm());
    }

    let decomposition = DecompositionResult {
        residual_factorization: frob(&(&u_final.matrix - &product)),
        residual_ode: if has_interior {
            verify_ode(&traj)?
        } else {
            Vec::new()
        },
        residual_identity: identity_residuals(&traj)?,
        residual_circularity: circularity_equivalence(&traj, flags)?,
        isometry_defect_holonomy,
        dynamic: d.clone(),
        product,
        holonomy: holonomy.clone(),
    };

    Ok(Analysis {
        holonomy_ode: if has_interior {
            holonomy_ode_residuals(&traj, &hol)?
        } else {
            Vec::new()
        },
        dynamic_ode: if has_interior {
            dynamic_ode_residuals(&traj, &dynp)?
        } else {
            Vec::new()
        },
        anti_hermitian_max: max_anti_hermitian_defect(&traj),
        dynamic_support: frob(&(p0 * &d * p0 - &d)),
        holonomy_intertwining: frob(&(last.p.as_matrix() * &holonomy.matrix - &holonomy.matrix)),
        evolution_isometry_max,
        evolution_intertwining_max,
        norm_drift_max,
        gram_defect_max,
        pdot_hermitian_max,
        pdot_trace_max,
        decomposition,
        trajectory: traj,
    })
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub dt: f64,
    pub steps: usize,
    pub res_factorization: f64,
    pub res_ode_max: f64,
    pub res_identity_max: f64,
    pub res_circularity: f64,
    pub iso_defect_src: f64,
    pub iso_defect_tgt: f64,
    pub holonomy_ode_max: f64,
    pub dynamic_ode_max: f64,
    pub holonomy_intertwining: f64,
}

impl StudyRow {
    pub fn from_analysis(a: &Analysis) -> Self {
        let d = &a.decomposition;
        Self {
            dt: a.dt(),
            steps: a.trajectory.steps(),
            res_factorization: d.residual_factorization,
            res_ode_max: a.ode_max(),
            res_identity_max: a.identity_max(),
            res_circularity: d.residual_circularity,
            iso_defect_src: d.isometry_defect_holonomy.0,
            iso_defect_tgt: d.isometry_defect_holonomy.1,
            holonomy_ode_max: max(&a.holonomy_ode),
            dynamic_ode_max: max(&a.dynamic_ode),
            holonomy_intertwining: a.holonomy_intertwining,
        }
    }
}

/// Rows at Δt, Δt/2, …, Δt/2^halvings (sorted by Δt descending) plus the
/// fitted orders of the factorization and ODE residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<StudyRow>,
    pub order_factorization: FittedOrder,
    pub order_ode: FittedOrder,
}

impl ConvergenceTable {
    pub fn from_rows(mut rows: Vec<StudyRow>) -> Self {
        rows.sort_by(|a, b| b.dt.total_cmp(&a.dt));
        let order_factorization = Self::fit_rows(&rows, |r| r.res_factorization);
        let order_ode = Self::fit_rows(&rows, |r| r.res_ode_max);
        Self {
            rows,
            order_factorization,
            order_ode,
        }
    }

    pub fn fit(&self, column: impl Fn(&StudyRow) -> f64) -> FittedOrder {
        Self::fit_rows(&self.rows, column)
    }

    fn fit_rows(rows: &[StudyRow], column: impl Fn(&StudyRow) -> f64) -> FittedOrder {
        let dts: Vec<f64> = rows.iter().map(|r| r.dt).collect();
        let vals: Vec<f64> = rows.iter().map(column).collect();
        fitted_order(&dts, &vals)
    }
}

/// Runs `analyze` at `config.steps · 2^i` for i = 0..=halvings. The runs are
/// independent and execute on separate threads.
pub fn run_halvings(config: &ModelConfig, halvings: u32) -> Result<Vec<Analysis>> {
    thread::scope(|scope| {
        let handles: Vec<_> = (0..=halvings)
            .map(|i| {
                let cfg = config.with_steps(config.steps << i);
                scope.spawn(move || analyze(&cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("analysis thread panicked"))
            .collect()
    })
}

pub fn convergence_study(config: &ModelConfig, halvings: u32) -> Result<ConvergenceTable> {
    let runs = run_halvings(config, halvings)?;
    Ok(ConvergenceTable::from_rows(
        runs.iter().map(StudyRow::from_analysis).collect(),
    ))
}
