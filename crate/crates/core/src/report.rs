//! Serializable run reports and the flat CSV form of convergence tables.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::analysis::{Analysis, ConvergenceTable};
use crate::models::{ModelConfig, Threshold};
use crate::verify::{tier_one_checks, Check};

pub const CSV_HEADER: [&str; 9] = [
    "dt",
    "res_factorization",
    "res_ode_max",
    "res_identity_max",
    "res_circularity",
    "iso_defect_src",
    "iso_defect_tgt",
    "fitted_order_fact",
    "fitted_order_ode",
];

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub model: String,
    pub dim: usize,
    pub rank: usize,
    pub params: BTreeMap<String, f64>,
    pub t_final: f64,
    pub steps: usize,
    pub dt: f64,
    pub tolerance_identity: f64,
    pub tolerance_ode: String,
    pub tolerance_factorization: String,
    pub repolarize_holonomy: bool,
    pub reverse_holonomy_order: bool,
    pub reverse_dynamic_order: bool,
    pub reorthonormalize_every: usize,
    pub seed: Option<u64>,
}

fn threshold_str(t: Threshold) -> String {
    match t {
        Threshold::Auto => "auto".into(),
        Threshold::Fixed(x) => format!("{x:e}"),
    }
}

impl ConfigEcho {
    pub fn new(config: &ModelConfig) -> Self {
        let m = &config.model;
        Self {
            model: m.name().to_string(),
            dim: m.dim(),
            rank: m.rank(),
            params: m.params().clone(),
            t_final: config.t_final,
            steps: config.steps,
            dt: config.dt(),
            tolerance_identity: config.tolerances.identity,
            tolerance_ode: threshold_str(config.tolerances.ode),
            tolerance_factorization: threshold_str(config.tolerances.factorization),
            repolarize_holonomy: config.flags.repolarize_holonomy,
            reverse_holonomy_order: config.flags.reverse_holonomy_order,
            reverse_dynamic_order: config.flags.reverse_dynamic_order,
            reorthonormalize_every: config.reorthonormalize_every,
            seed: config.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    pub factorization: f64,
    pub circularity: f64,
    pub ode_max: f64,
    pub identity_max: f64,
    pub anti_hermitian_max: f64,
    pub dynamic_support: f64,
    pub holonomy_intertwining: f64,
    /// Per interior node.
    pub ode: Vec<f64>,
    /// Per node.
    pub identity: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub dt: f64,
    pub steps: usize,
    pub res_factorization: f64,
    pub res_ode_max: f64,
    pub res_identity_max: f64,
    pub res_circularity: f64,
    pub iso_defect_src: f64,
    pub iso_defect_tgt: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSection {
    pub rows: Vec<TableRow>,
    pub fitted_order_factorization: String,
    pub fitted_order_ode: String,
}

impl ConvergenceSection {
    pub fn new(table: &ConvergenceTable) -> Self {
        Self {
            rows: table
                .rows
                .iter()
                .map(|r| TableRow {
                    dt: r.dt,
                    steps: r.steps,
                    res_factorization: r.res_factorization,
                    res_ode_max: r.res_ode_max,
                    res_identity_max: r.res_identity_max,
                    res_circularity: r.res_circularity,
                    iso_defect_src: r.iso_defect_src,
                    iso_defect_tgt: r.iso_defect_tgt,
                })
                .collect(),
            fitted_order_factorization: table.order_factorization.to_string(),
            fitted_order_ode: table.order_ode.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub config: ConfigEcho,
    pub residuals: Residuals,
    pub isometry_defect_holonomy: [f64; 2],
    pub isometry_defect_evolution_max: [f64; 2],
    pub tier_one: Vec<Check>,
    pub convergence: Option<ConvergenceSection>,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(config: &ModelConfig, analysis: &Analysis, wall_time_s: f64) -> Self {
        let d = &analysis.decomposition;
        Self {
            version: env!("CARGO_PKG_VERSION"),
            config: ConfigEcho::new(config),
            residuals: Residuals {
                factorization: d.residual_factorization,
                circularity: d.residual_circularity,
                ode_max: analysis.ode_max(),
                identity_max: analysis.identity_max(),
                anti_hermitian_max: analysis.anti_hermitian_max,
                dynamic_support: analysis.dynamic_support,
                holonomy_intertwining: analysis.holonomy_intertwining,
                ode: d.residual_ode.clone(),
                identity: d.residual_identity.clone(),
            },
            isometry_defect_holonomy: [d.isometry_defect_holonomy.0, d.isometry_defect_holonomy.1],
            isometry_defect_evolution_max: [
                analysis.evolution_isometry_max.0,
                analysis.evolution_isometry_max.1,
            ],
            tier_one: tier_one_checks(analysis, config),
            convergence: None,
            wall_time_s,
        }
    }

    pub fn tier_one_passed(&self) -> bool {
        self.tier_one.iter().all(|c| c.pass)
    }
}

/// One record per row in [`CSV_HEADER`] order. Floats use Rust's shortest
/// round-trip formatting, so identical inputs give identical bytes.
pub fn csv_records(table: &ConvergenceTable) -> Vec<[String; 9]> {
    let fact = table.order_factorization.to_string();
    let ode = table.order_ode.to_string();
    table
        .rows
        .iter()
        .map(|r| {
            [
                format!("{:e}", r.dt),
                format!("{:e}", r.res_factorization),
                format!("{:e}", r.res_ode_max),
                format!("{:e}", r.res_identity_max),
                format!("{:e}", r.res_circularity),
                format!("{:e}", r.iso_defect_src),
                format!("{:e}", r.iso_defect_tgt),
                fact.clone(),
                ode.clone(),
            ]
        })
        .collect()
}
