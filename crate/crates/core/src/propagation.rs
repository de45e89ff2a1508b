//! Schrödinger evolution of the subspace frame and the per-node data derived
//! from it.
//!
//! Frames are advanced with the exponential midpoint rule
//! `frame(t + Δt) = exp(−i H(t + Δt/2) Δt) · frame(t)`, which is second
//! order and unitary per step. Every node stores the frame, H, P = f·f†,
//! Ṗ = −i[H, P] and the coupling generator F.

use log::debug;

use crate::decomposition::{coupling_matrix, embed_generator, SubspaceGenerator};
use crate::error::{Error, Result};
use crate::linalg::{
    ensure_same_shape, matrix_exponential, ComplexMatrix, Frame, HermitianMatrix, PartialIsometry,
    I,
};
use crate::models::{HamiltonianModel, ModelConfig, ModelName};

pub const INTEGRATOR_ORDER: u32 = 2;

#[derive(Debug, Clone)]
pub struct Node {
    pub t: f64,
    pub frame: Frame,
    pub h: HermitianMatrix,
    pub p: HermitianMatrix,
    pub pdot: HermitianMatrix,
    pub f: SubspaceGenerator,
    /// max_j |‖ψ_j‖ − 1| measured before any reorthonormalization at this node.
    pub norm_drift: f64,
}

/// Gram defect removed by one reorthonormalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftRecord {
    pub t: f64,
    pub gram_defect: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryMeta {
    pub model: ModelName,
    pub dt: f64,
    pub integrator_order: u32,
    pub reorthonormalize_every: usize,
    pub drift: Vec<DriftRecord>,
}

/// Uniform-grid record of one subspace evolution. Immutable once built.
#[derive(Debug, Clone)]
pub struct Trajectory {
    model: HamiltonianModel,
    grid: Vec<f64>,
    nodes: Vec<Node>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn model(&self) -> &HamiltonianModel {
        &self.model
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> Result<&Node> {
        self.nodes.get(k).ok_or(Error::IndexOutOfRange {
            index: k,
            last: self.steps(),
        })
    }

    /// Number of steps M; nodes are indexed 0..=M.
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.meta.dt
    }

    pub fn initial(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn last(&self) -> &Node {
        self.nodes.last().expect("trajectory has at least one node")
    }

    /// Frame at t_k + Δt/2, reached from node k by a half step of the same
    /// midpoint rule (generator sampled at t_k + Δt/4).
    pub fn midpoint_frame(&self, k: usize) -> Result<Frame> {
        let node = self.node(k)?;
        let half = self.dt() / 2.0;
        let h = self.model.hamiltonian_at(node.t + half / 2.0)?;
        let step = matrix_exponential(&(h.as_matrix() * (-I * half)))?;
        Ok(Frame::from_unchecked(step * node.frame.columns()))
    }

    /// H(t_k + Δt/2).
    pub fn midpoint_hamiltonian(&self, k: usize) -> Result<HermitianMatrix> {
        let node = self.node(k)?;
        self.model.hamiltonian_at(node.t + self.dt() / 2.0)
    }
}

/// P = f·f†.
pub fn projector(f: &Frame) -> HermitianMatrix {
    HermitianMatrix::symmetrized(f.columns() * f.columns().adjoint())
}

/// Ṗ = −i[H, P], the derivative of P(t) along Schrödinger evolution.
pub fn projector_derivative_commutator(
    h: &HermitianMatrix,
    p: &HermitianMatrix,
) -> Result<HermitianMatrix> {
    ensure_same_shape(h, p, "projector_derivative_commutator")?;
    let comm = h.as_matrix() * p.as_matrix() - p.as_matrix() * h.as_matrix();
    Ok(HermitianMatrix::symmetrized(comm * (-I)))
}

/// Finite-difference estimate of Ṗ at node k.
#[derive(Debug, Clone)]
pub struct FiniteDifference {
    pub value: HermitianMatrix,
    /// Set at the grid boundaries, where only a first-order one-sided
    /// difference is available.
    pub one_sided: bool,
}

/// (P(t_{k+1}) − P(t_{k−1}))/(2Δt) at interior nodes, one-sided at the ends.
pub fn projector_derivative_fd(traj: &Trajectory, k: usize) -> Result<FiniteDifference> {
    let m = traj.steps();
    if k > m {
        return Err(Error::IndexOutOfRange { index: k, last: m });
    }
    if m < 1 {
        return Err(Error::InsufficientGrid {
            op: "projector_derivative_fd",
            steps: m,
            required: 1,
        });
    }
    let p = |i: usize| traj.nodes[i].p.as_matrix();
    let dt = traj.dt();
    let (value, one_sided) = if k == 0 {
        ((p(1) - p(0)) / crate::linalg::c(dt, 0.0), true)
    } else if k == m {
        ((p(m) - p(m - 1)) / crate::linalg::c(dt, 0.0), true)
    } else {
        (
            (p(k + 1) - p(k - 1)) / crate::linalg::c(2.0 * dt, 0.0),
            false,
        )
    };
    Ok(FiniteDifference {
        value: HermitianMatrix::symmetrized(value),
        one_sided,
    })
}

fn make_node(
    model: &HamiltonianModel,
    frame0: &Frame,
    t: f64,
    frame: Frame,
    norm_drift: f64,
) -> Result<Node> {
    let h = model.hamiltonian_at(t)?;
    let p = projector(&frame);
    let pdot = projector_derivative_commutator(&h, &p)?;
    let f = embed_generator(&coupling_matrix(&frame, &h)?, frame0)?;
    Ok(Node {
        t,
        frame,
        h,
        p,
        pdot,
        f,
        norm_drift,
    })
}

fn norm_drift(columns: &ComplexMatrix) -> f64 {
    columns
        .column_iter()
        .map(|col| (col.norm() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Integrates the frame of `model` over the grid described by `config`.
///
/// The model is taken separately from `config.model` so that the same grid
/// can be reused with a rotated initial frame.
pub fn evolve_frames(model: &HamiltonianModel, config: &ModelConfig) -> Result<Trajectory> {
    let steps = config.steps;
    let dt = config.dt();
    let every = config.reorthonormalize_every.max(1);
    let frame0 = model.initial_frame().clone();

    let mut grid = Vec::with_capacity(steps + 1);
    let mut nodes = Vec::with_capacity(steps + 1);
    let mut drift = Vec::new();

    grid.push(0.0);
    nodes.push(make_node(
        model,
        &frame0,
        0.0,
        frame0.clone(),
        norm_drift(frame0.columns()),
    )?);

    let mut columns = frame0.columns().clone();
    for k in 0..steps {
        let t = k as f64 * dt;
        let h_mid = model.hamiltonian_at(t + dt / 2.0)?;
        let step = matrix_exponential(&(h_mid.as_matrix() * (-I * dt)))
            .map_err(|e| propagation_error(t, e))?;
        columns = step * columns;

        let t_next = if k + 1 == steps {
            config.t_final
        } else {
            (k + 1) as f64 * dt
        };
        let drift_here = norm_drift(&columns);
        if (k + 1) % every == 0 {
            let before = Frame::from_unchecked(columns.clone()).gram_defect();
            let cleaned = Frame::from_unchecked(columns)
                .reorthonormalized()
                .map_err(|e| propagation_error(t_next, e))?;
            debug!("reorthonormalized at t = {t_next:.6}: Gram defect {before:.3e}");
            drift.push(DriftRecord {
                t: t_next,
                gram_defect: before,
            });
            columns = cleaned.columns().clone();
        }
        grid.push(t_next);
        let frame = Frame::from_unchecked(columns.clone());
        nodes.push(make_node(model, &frame0, t_next, frame, drift_here)?);
    }

    Ok(Trajectory {
        model: model.clone(),
        grid,
        nodes,
        meta: TrajectoryMeta {
            model: model.name(),
            dt,
            integrator_order: INTEGRATOR_ORDER,
            reorthonormalize_every: every,
            drift,
        },
    })
}

fn propagation_error(time: f64, source: Error) -> Error {
    Error::Propagation {
        time,
        source: Box::new(source),
    }
}

/// U(t_k, 0) = Σ_j |ψ_j(t_k)⟩⟨ψ_j(0)| with its source and target projectors.
pub fn evolution_operator(traj: &Trajectory, k: usize) -> Result<PartialIsometry> {
    let node = traj.node(k)?;
    let first = traj.initial();
    Ok(PartialIsometry {
        matrix: node.frame.columns() * first.frame.columns().adjoint(),
        source_projector: first.p.clone(),
        target_projector: node.p.clone(),
    })
}
