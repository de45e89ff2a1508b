//! The full invariant suite for one configured model: propagation and
//! decomposition properties, convergence orders, frame covariance and the
//! ordering negative controls. One [`Check`] per property.

use serde::Serialize;

use crate::analysis::{max, run_halvings, Analysis};
use crate::convergence::{fitted_order, is_monotone_decreasing, FittedOrder};
use crate::decomposition::{
    dynamic_ode_residuals, dynamic_partials, holonomy_ode_residuals, holonomy_partials,
    GeneratorRoute, ProductOrder,
};
use crate::error::Result;
use crate::linalg::{frob, seeded_random_unitary, ComplexMatrix};
use crate::models::{ModelConfig, Threshold};

pub const VERIFY_HALVINGS: u32 = 4;
/// Seed for the frame rotation when the config has none.
pub const COVARIANCE_SEED: u64 = 0x5eed;

pub const NORM_TOL: f64 = 1e-10;
pub const GRAM_TOL: f64 = 1e-10;
pub const PDOT_TRACE_TOL: f64 = 1e-10;
pub const ISOMETRY_TOL: f64 = 1e-10;
pub const ANTI_HERMITIAN_TOL: f64 = 1e-12;
pub const SUPPORT_TOL: f64 = 1e-11;
pub const COVARIANCE_TOL: f64 = 1e-9;
pub const ORDER_TARGET: f64 = 2.0;
pub const ORDER_SLACK: f64 = 0.2;
/// Monotone-decrease noise allowance for the holonomy isometry defect.
pub const MONOTONE_NOISE: f64 = 0.1;
/// A reversed product counts as degraded when its fitted order is at most
/// this.
pub const DEGRADED_ORDER: f64 = 1.2;
/// Reversed and standard products closer than this everywhere mean the
/// generators commute and the negative control says nothing.
pub const COMMUTING_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: String,
    pub threshold: String,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured: format!("{measured:.3e}"),
            threshold: format!("≤ {threshold:.1e}"),
            pass: measured <= threshold && measured.is_finite(),
        }
    }

    fn order_near(name: &str, order: FittedOrder) -> Self {
        Self {
            name: name.into(),
            measured: order.to_string(),
            threshold: format!("{ORDER_TARGET} ± {ORDER_SLACK} or exact"),
            pass: order.matches(ORDER_TARGET, ORDER_SLACK),
        }
    }

    fn order_at_least(name: &str, order: FittedOrder, min: f64) -> Self {
        Self {
            name: name.into(),
            measured: order.to_string(),
            threshold: format!("≥ {min} or exact"),
            pass: order.at_least(min),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {:<48} {:>14}  ({})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub model: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Tier-1 checks: identities that hold to rounding regardless of Δt.
pub fn tier_one_checks(a: &Analysis, config: &ModelConfig) -> Vec<Check> {
    let tol = config.tolerances.identity;
    vec![
        Check::at_most("generator identity F = -iU†HU", a.identity_max(), tol),
        Check::at_most(
            "circularity equivalence",
            a.decomposition.residual_circularity,
            tol,
        ),
        Check::at_most(
            "coupling generator anti-Hermiticity",
            a.anti_hermitian_max,
            tol,
        ),
    ]
}

fn dts(runs: &[Analysis]) -> Vec<f64> {
    runs.iter().map(Analysis::dt).collect()
}

fn fit(runs: &[Analysis], f: impl Fn(&Analysis) -> f64) -> FittedOrder {
    let vals: Vec<f64> = runs.iter().map(f).collect();
    fitted_order(&dts(runs), &vals)
}

fn max_diff(a: &[ComplexMatrix], b: &[ComplexMatrix]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| frob(&(x - y)))
        .fold(0.0, f64::max)
}

fn series_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Global error of the frame integrator for each run: against the closed
/// form when the model has one, otherwise against the next finer run.
fn integrator_errors(runs: &[Analysis]) -> Result<(Vec<f64>, Vec<f64>)> {
    let model = runs[0].trajectory.model();
    let t_final = runs[0].trajectory.last().t;
    let f0 = model.initial_frame().columns();
    if let Some(u_ref) = model.reference_propagator(t_final)? {
        let exact = u_ref * f0;
        let errs = runs
            .iter()
            .map(|r| frob(&(r.trajectory.last().frame.columns() - &exact)))
            .collect();
        return Ok((dts(runs), errs));
    }
    let us: Vec<ComplexMatrix> = runs
        .iter()
        .map(|r| r.trajectory.last().frame.columns() * f0.adjoint())
        .collect();
    let errs = us.windows(2).map(|w| frob(&(&w[0] - &w[1]))).collect();
    Ok((dts(&runs[..runs.len() - 1]), errs))
}

struct Control {
    commuting: bool,
    order: FittedOrder,
}

/// Rebuilds each run's product with the given order and fits its
/// defining-ODE residual.
fn ordering_control(runs: &[Analysis], holonomy: bool) -> Result<Control> {
    let mut residuals = Vec::with_capacity(runs.len());
    let mut spread = 0.0f64;
    for r in runs {
        let traj = &r.trajectory;
        let (standard, reversed) = if holonomy {
            (
                holonomy_partials(traj, ProductOrder::Standard, false)?,
                holonomy_partials(traj, ProductOrder::Reversed, false)?,
            )
        } else {
            (
                dynamic_partials(traj, GeneratorRoute::Coupling, ProductOrder::Standard)?,
                dynamic_partials(traj, GeneratorRoute::Coupling, ProductOrder::Reversed)?,
            )
        };
        spread = spread.max(max_diff(&standard, &reversed));
        let res = if holonomy {
            holonomy_ode_residuals(traj, &reversed)?
        } else {
            dynamic_ode_residuals(traj, &reversed)?
        };
        residuals.push(max(&res));
    }
    Ok(Control {
        commuting: spread <= COMMUTING_TOL,
        order: fitted_order(&dts(runs), &residuals),
    })
}

fn control_check(name: &str, control: &Control) -> Check {
    let degraded = match control.order {
        FittedOrder::Slope(p) => p <= DEGRADED_ORDER,
        FittedOrder::Undetermined => true,
        FittedOrder::Exact => false,
    };
    Check {
        name: name.into(),
        measured: if control.commuting {
            "n/a (commuting)".into()
        } else {
            control.order.to_string()
        },
        threshold: format!("≤ {DEGRADED_ORDER}"),
        pass: control.commuting || degraded,
    }
}

/// Runs the suite on `config` refined `halvings` times.
pub fn verify_suite(config: &ModelConfig, halvings: u32) -> Result<VerifyReport> {
    let runs = run_halvings(config, halvings)?;
    let base = &runs[0];

    let frame0 = config.model.initial_frame();
    let v = seeded_random_unitary(frame0.rank(), config.seed.unwrap_or(COVARIANCE_SEED))?;
    let rotated_model = config.model.with_frame(frame0.rotated(&v)?)?;
    let rotated = crate::analysis::analyze(&config.with_model(rotated_model))?;

    let mut checks = Vec::new();
    let all_max = |f: &dyn Fn(&Analysis) -> f64| runs.iter().map(f).fold(0.0, f64::max);

    // propagation
    checks.push(Check::at_most(
        "norm conservation",
        all_max(&|a| a.norm_drift_max),
        NORM_TOL,
    ));
    checks.push(Check::at_most(
        "frame Gram defect",
        all_max(&|a| a.gram_defect_max),
        GRAM_TOL,
    ));
    checks.push(Check::at_most(
        "projector derivative trace",
        all_max(&|a| a.pdot_trace_max),
        PDOT_TRACE_TOL,
    ));
    checks.push(Check::at_most(
        "U partial isometry",
        all_max(&|a| a.evolution_isometry_max.0.max(a.evolution_isometry_max.1)),
        ISOMETRY_TOL,
    ));
    checks.push(Check::at_most(
        "U intertwining",
        all_max(&|a| {
            a.evolution_intertwining_max
                .0
                .max(a.evolution_intertwining_max.1)
        }),
        ISOMETRY_TOL,
    ));
    let cov_prop = {
        let us = max_diff(&base.evolution_operators(), &rotated.evolution_operators());
        let nodes = base
            .trajectory
            .nodes()
            .iter()
            .zip(rotated.trajectory.nodes());
        let ps = nodes
            .clone()
            .map(|(a, b)| frob(&(a.p.as_matrix() - b.p.as_matrix())))
            .fold(0.0, f64::max);
        let pdots = nodes
            .map(|(a, b)| frob(&(a.pdot.as_matrix() - b.pdot.as_matrix())))
            .fold(0.0, f64::max);
        us.max(ps).max(pdots)
    };
    checks.push(Check::at_most(
        "frame covariance of U, P, Ṗ",
        cov_prop,
        COVARIANCE_TOL,
    ));
    let (err_dts, errs) = integrator_errors(&runs)?;
    checks.push(Check::order_near(
        "integrator order",
        fitted_order(&err_dts, &errs),
    ));

    // decomposition
    checks.push(Check::at_most(
        "coupling generator anti-Hermiticity",
        all_max(&|a| a.anti_hermitian_max),
        ANTI_HERMITIAN_TOL,
    ));
    checks.push(Check::at_most(
        "dynamic factor support",
        all_max(&|a| a.dynamic_support),
        SUPPORT_TOL,
    ));
    checks.push(Check::order_at_least(
        "holonomy intertwining order",
        fit(&runs, |a| a.holonomy_intertwining),
        1.0,
    ));
    checks.push(Check::at_most(
        "generator identity F = -iU†HU",
        all_max(&|a| a.identity_max()),
        config.tolerances.identity,
    ));
    checks.push(Check::at_most(
        "circularity equivalence",
        all_max(&|a| a.decomposition.residual_circularity),
        config.tolerances.identity,
    ));
    checks.push(match config.tolerances.factorization {
        Threshold::Auto => Check::order_at_least(
            "factorization order",
            fit(&runs, |a| a.decomposition.residual_factorization),
            1.0,
        ),
        Threshold::Fixed(x) => Check::at_most(
            "factorization residual",
            base.decomposition.residual_factorization,
            x,
        ),
    });
    checks.push(match config.tolerances.ode {
        Threshold::Auto => Check::order_near("evolution ODE order", fit(&runs, Analysis::ode_max)),
        Threshold::Fixed(x) => Check::at_most("evolution ODE residual", base.ode_max(), x),
    });
    let iso: Vec<f64> = runs
        .iter()
        .map(|a| {
            let (s, t) = a.decomposition.isometry_defect_holonomy;
            s.max(t)
        })
        .collect();
    checks.push(Check {
        name: "holonomy isometry defect decreasing".into(),
        measured: format!("{:.3e} → {:.3e}", iso[0], iso[iso.len() - 1]),
        threshold: format!("monotone within {:.0}%", MONOTONE_NOISE * 100.0),
        pass: is_monotone_decreasing(&iso, MONOTONE_NOISE),
    });
    let cov_dec = {
        let (a, b) = (&base.decomposition, &rotated.decomposition);
        let ops = frob(&(&a.holonomy.matrix - &b.holonomy.matrix))
            .max(frob(&(&a.dynamic - &b.dynamic)))
            .max(frob(&(&a.product - &b.product)));
        let scalars = (a.residual_factorization - b.residual_factorization)
            .abs()
            .max((a.residual_circularity - b.residual_circularity).abs())
            .max((a.isometry_defect_holonomy.0 - b.isometry_defect_holonomy.0).abs())
            .max((a.isometry_defect_holonomy.1 - b.isometry_defect_holonomy.1).abs());
        let series = series_diff(&a.residual_ode, &b.residual_ode)
            .max(series_diff(&a.residual_identity, &b.residual_identity));
        ops.max(scalars).max(series)
    };
    checks.push(Check::at_most(
        "frame covariance of W, D, residuals",
        cov_dec,
        COVARIANCE_TOL,
    ));
    checks.push(Check::order_near(
        "holonomy product ODE order",
        fit(&runs, |a| max(&a.holonomy_ode)),
    ));
    checks.push(Check::order_near(
        "dynamic product ODE order",
        fit(&runs, |a| max(&a.dynamic_ode)),
    ));
    checks.push(control_check(
        "negative control: reversed holonomy ordering",
        &ordering_control(&runs, true)?,
    ));
    checks.push(control_check(
        "negative control: reversed dynamic ordering",
        &ordering_control(&runs, false)?,
    ));

    Ok(VerifyReport {
        model: config.model.name().to_string(),
        checks,
    })
}
