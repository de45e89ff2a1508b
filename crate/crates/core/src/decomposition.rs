//! Coupling generator, holonomy factor and dynamic factor of the subspace
//! evolution operator, and the residuals that check how they fit together.
//!
//! With U(t,0) = Σ_j |ψ_j(t)⟩⟨ψ_j(0)| and P(t) = U U†, the evolution obeys
//!
//! ```text
//! U̇ = Ṗ U + U F,    F(t,0) = Σ_jk F_jk(t) |ψ_j(0)⟩⟨ψ_k(0)|,    F_jk = −i⟨ψ_j(t)|H|ψ_k(t)⟩
//! ```
//!
//! whose formal solution is U = W · D with the path-ordered holonomy factor
//! W = 𝒫 exp(∫Ṗ) P(0) and the reverse-time-ordered dynamic factor
//! D = P(0) T̄ exp(∫F). The catch is that F(t,0) = −i U†(t,0) H(t) U(t,0)
//! identically, so D is built out of U itself. [`circularity_equivalence`]
//! evaluates D through both expressions and measures the difference.
//!
//! Both ordered exponentials are discretized with one exponential per step
//! and the generator sampled at the step midpoint. 𝒫 puts later times on
//! the left, T̄ puts them on the right.

use crate::error::{Error, Result};
use crate::linalg::{
    anti_hermitian_defect, c, frob, isometry_defect, matrix_exponential, polar_isometry,
    ComplexMatrix, Frame, HermitianMatrix, PartialIsometry, I,
};
use crate::models::Flags;
use crate::propagation::{
    evolution_operator, projector, projector_derivative_commutator, Trajectory,
};

/// F(t,0): the ℓ×ℓ matrix F_jk(t) in the initial basis and its N×N embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceGenerator {
    pub matrix: ComplexMatrix,
    pub embedding: ComplexMatrix,
}

impl SubspaceGenerator {
    pub fn rank(&self) -> usize {
        self.matrix.nrows()
    }
}

/// F_jk = −i ψ_j† H ψ_k for the columns ψ of `frame_t`.
pub fn coupling_matrix(frame_t: &Frame, h: &HermitianMatrix) -> Result<ComplexMatrix> {
    if h.dim() != frame_t.dim() {
        return Err(Error::Dimension {
            op: "coupling_matrix",
            detail: format!("H is {0}x{0}, frame lives in C^{1}", h.dim(), frame_t.dim()),
        });
    }
    let f = frame_t.columns();
    Ok(f.adjoint() * h.as_matrix() * f * (-I))
}

/// F(t,0) = frame_0 · matrix · frame_0†.
pub fn embed_generator(matrix: &ComplexMatrix, frame_0: &Frame) -> Result<SubspaceGenerator> {
    let l = frame_0.rank();
    if matrix.shape() != (l, l) {
        return Err(Error::Dimension {
            op: "embed_generator",
            detail: format!("generator is {:?}, frame has rank {l}", matrix.shape()),
        });
    }
    let f0 = frame_0.columns();
    Ok(SubspaceGenerator {
        matrix: matrix.clone(),
        embedding: f0 * matrix * f0.adjoint(),
    })
}

/// −i U† H U, the same operator as the embedded coupling generator written
/// in terms of the evolution operator.
pub fn generator_from_evolution(u: &ComplexMatrix, h: &HermitianMatrix) -> Result<ComplexMatrix> {
    if u.shape() != h.shape() {
        return Err(Error::Dimension {
            op: "generator_from_evolution",
            detail: format!("U is {:?}, H is {:?}", u.shape(), h.shape()),
        });
    }
    Ok(u.adjoint() * h.as_matrix() * u * (-I))
}

/// Which way a discrete ordered product is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductOrder {
    /// The convention that solves the defining ODE: 𝒫 with later factors on
    /// the left, T̄ with later factors on the right.
    Standard,
    /// The opposite placement, kept as a negative control.
    Reversed,
}

impl ProductOrder {
    pub fn from_flag(reversed: bool) -> Self {
        if reversed {
            ProductOrder::Reversed
        } else {
            ProductOrder::Standard
        }
    }
}

/// How the dynamic generator is evaluated at each step midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorRoute {
    /// frame_0 · (−i ψ†Hψ) · frame_0†
    Coupling,
    /// −i U† H U
    Evolution,
}

/// Ṗ at t_k + Δt/2 from the midpoint projector.
pub fn midpoint_pdot(traj: &Trajectory, k: usize) -> Result<HermitianMatrix> {
    let p_mid = projector(&traj.midpoint_frame(k)?);
    projector_derivative_commutator(&traj.midpoint_hamiltonian(k)?, &p_mid)
}

/// F(t_k + Δt/2, 0) through the requested route.
pub fn midpoint_generator(
    traj: &Trajectory,
    k: usize,
    route: GeneratorRoute,
) -> Result<ComplexMatrix> {
    let frame_mid = traj.midpoint_frame(k)?;
    let h_mid = traj.midpoint_hamiltonian(k)?;
    let frame_0 = &traj.initial().frame;
    match route {
        GeneratorRoute::Coupling => {
            Ok(embed_generator(&coupling_matrix(&frame_mid, &h_mid)?, frame_0)?.embedding)
        }
        GeneratorRoute::Evolution => {
            let u_mid = frame_mid.columns() * frame_0.columns().adjoint();
            generator_from_evolution(&u_mid, &h_mid)
        }
    }
}

/// Partial products W_0 = P(0), W_1, …, W_M of the holonomy factor.
pub fn holonomy_partials(
    traj: &Trajectory,
    order: ProductOrder,
    repolarize: bool,
) -> Result<Vec<ComplexMatrix>> {
    let dt = c(traj.dt(), 0.0);
    let p0 = traj.initial().p.as_matrix().clone();
    let rank = traj.initial().frame.rank();
    let mut out = Vec::with_capacity(traj.steps() + 1);
    out.push(p0.clone());
    // Reversed products accumulate E_1 E_2 ⋯ E_k and apply P(0) afterwards.
    let mut reversed_acc = ComplexMatrix::identity(p0.nrows(), p0.ncols());
    for k in 0..traj.steps() {
        let step = matrix_exponential(&(midpoint_pdot(traj, k)?.as_matrix() * dt))?;
        let next = match order {
            ProductOrder::Standard => step * out.last().expect("nonempty"),
            ProductOrder::Reversed => {
                reversed_acc = &reversed_acc * step;
                &reversed_acc * &p0
            }
        };
        let next = if repolarize {
            polar_isometry(&next, rank).map_err(|e| {
                Error::Decomposition(format!("holonomy polar factor at step {k}: {e}"))
            })?
        } else {
            next
        };
        out.push(next);
    }
    Ok(out)
}

/// W = 𝒫 exp(∫₀ᵗ Ṗ dτ) P(0) at the final node. Not an exact partial
/// isometry at finite Δt; its defect is reported, not enforced.
pub fn holonomy_factor(traj: &Trajectory, flags: &Flags) -> Result<PartialIsometry> {
    let partials = holonomy_partials(
        traj,
        ProductOrder::from_flag(flags.reverse_holonomy_order),
        flags.repolarize_holonomy,
    )?;
    Ok(PartialIsometry {
        matrix: partials.into_iter().last().expect("nonempty"),
        source_projector: traj.initial().p.clone(),
        target_projector: traj.last().p.clone(),
    })
}

/// Partial products D_0 = P(0), D_1, …, D_M of the dynamic factor.
pub fn dynamic_partials(
    traj: &Trajectory,
    route: GeneratorRoute,
    order: ProductOrder,
) -> Result<Vec<ComplexMatrix>> {
    let dt = c(traj.dt(), 0.0);
    let p0 = traj.initial().p.as_matrix().clone();
    let mut out = Vec::with_capacity(traj.steps() + 1);
    out.push(p0.clone());
    let mut reversed_acc = ComplexMatrix::identity(p0.nrows(), p0.ncols());
    for k in 0..traj.steps() {
        let step = matrix_exponential(&(midpoint_generator(traj, k, route)? * dt))?;
        let next = match order {
            ProductOrder::Standard => out.last().expect("nonempty") * step,
            ProductOrder::Reversed => {
                reversed_acc = step * &reversed_acc;
                &p0 * &reversed_acc
            }
        };
        out.push(next);
    }
    Ok(out)
}

/// D = P(0) T̄ exp(∫₀ᵗ F(τ,0) dτ) at the final node, built from the
/// coupling matrix elements.
pub fn dynamic_factor(traj: &Trajectory, flags: &Flags) -> Result<ComplexMatrix> {
    let partials = dynamic_partials(
        traj,
        GeneratorRoute::Coupling,
        ProductOrder::from_flag(flags.reverse_dynamic_order),
    )?;
    Ok(partials.into_iter().last().expect("nonempty"))
}

/// Per-node ‖−iU†HU − embed(F_jk)‖_F.
pub fn identity_residuals(traj: &Trajectory) -> Result<Vec<f64>> {
    (0..=traj.steps())
        .map(|k| {
            let node = &traj.nodes()[k];
            let u = evolution_operator(traj, k)?;
            let from_u = generator_from_evolution(&u.matrix, &node.h)?;
            Ok(frob(&(from_u - &node.f.embedding)))
        })
        .collect()
}

fn require_interior(traj: &Trajectory, op: &'static str) -> Result<()> {
    if traj.steps() < 2 {
        Err(Error::InsufficientGrid {
            op,
            steps: traj.steps(),
            required: 2,
        })
    } else {
        Ok(())
    }
}

/// Central-difference residual of a sequence of node values against a
/// right-hand side evaluated at interior nodes.
fn central_residuals(
    traj: &Trajectory,
    values: &[ComplexMatrix],
    rhs: impl Fn(usize) -> ComplexMatrix,
) -> Vec<f64> {
    let two_dt = c(2.0 * traj.dt(), 0.0);
    (1..traj.steps())
        .map(|k| frob(&((&values[k + 1] - &values[k - 1]) / two_dt - rhs(k))))
        .collect()
}

/// r_k = ‖(U_{k+1} − U_{k−1})/(2Δt) − Ṗ_k U_k − U_k F_k‖_F at interior nodes.
pub fn verify_ode(traj: &Trajectory) -> Result<Vec<f64>> {
    require_interior(traj, "verify_ode")?;
    let us = (0..=traj.steps())
        .map(|k| evolution_operator(traj, k).map(|u| u.matrix))
        .collect::<Result<Vec<_>>>()?;
    Ok(central_residuals(traj, &us, |k| {
        let n = &traj.nodes()[k];
        n.pdot.as_matrix() * &us[k] + &us[k] * &n.f.embedding
    }))
}

/// Residual of Ẇ = Ṗ W along a sequence of holonomy partial products.
pub fn holonomy_ode_residuals(traj: &Trajectory, partials: &[ComplexMatrix]) -> Result<Vec<f64>> {
    require_interior(traj, "holonomy_ode_residuals")?;
    Ok(central_residuals(traj, partials, |k| {
        traj.nodes()[k].pdot.as_matrix() * &partials[k]
    }))
}

/// Residual of Ḋ = D F along a sequence of dynamic partial products.
pub fn dynamic_ode_residuals(traj: &Trajectory, partials: &[ComplexMatrix]) -> Result<Vec<f64>> {
    require_interior(traj, "dynamic_ode_residuals")?;
    Ok(central_residuals(traj, partials, |k| {
        &partials[k] * &traj.nodes()[k].f.embedding
    }))
}

/// ‖D_coupling − D_evolution‖_F: the dynamic factor assembled from F_jk
/// versus the one assembled from −iU†HU on the same trajectory.
pub fn circularity_equivalence(traj: &Trajectory, flags: &Flags) -> Result<f64> {
    let order = ProductOrder::from_flag(flags.reverse_dynamic_order);
    let a = dynamic_partials(traj, GeneratorRoute::Coupling, order)?;
    let b = dynamic_partials(traj, GeneratorRoute::Evolution, order)?;
    Ok(frob(
        &(a.last().expect("nonempty") - b.last().expect("nonempty")),
    ))
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub holonomy: PartialIsometry,
    pub dynamic: ComplexMatrix,
    pub product: ComplexMatrix,
    /// ‖U(t_M,0) − W·D‖_F
    pub residual_factorization: f64,
    /// Per interior node; empty when the grid has fewer than two steps.
    pub residual_ode: Vec<f64>,
    pub residual_identity: Vec<f64>,
    pub residual_circularity: f64,
    pub isometry_defect_holonomy: (f64, f64),
}

/// Builds W and D, composes them as written (both P(0) factors kept) and
/// gathers every residual.
pub fn verify_factorization(traj: &Trajectory, flags: &Flags) -> Result<DecompositionResult> {
    let holonomy = holonomy_factor(traj, flags)?;
    let dynamic = dynamic_factor(traj, flags)?;
    let product = &holonomy.matrix * &dynamic;
    let u = evolution_operator(traj, traj.steps())?;
    let residual_factorization = frob(&(&u.matrix - &product));
    let residual_ode = if traj.steps() >= 2 {
        verify_ode(traj)?
    } else {
        Vec::new()
    };
    let isometry_defect_holonomy = isometry_defect(
        &holonomy.matrix,
        &holonomy.source_projector,
        &holonomy.target_projector,
    )?;
    Ok(DecompositionResult {
        residual_identity: identity_residuals(traj)?,
        residual_circularity: circularity_equivalence(traj, flags)?,
        holonomy,
        dynamic,
        product,
        residual_factorization,
        residual_ode,
        isometry_defect_holonomy,
    })
}

/// max_k ‖F_k + F_k†‖_F over the ℓ×ℓ coupling matrices.
pub fn max_anti_hermitian_defect(traj: &Trajectory) -> f64 {
    traj.nodes()
        .iter()
        .map(|n| anti_hermitian_defect(&n.f.matrix))
        .fold(0.0, f64::max)
}
