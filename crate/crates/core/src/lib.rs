//! Numerical toolkit for the evolution operator of a subspace under a
//! time-dependent Hamiltonian.
//!
//! Given H(t) on C^N and an ℓ-dimensional initial subspace, the crate
//! integrates the Schrödinger equation for a frame of that subspace, builds
//! U(t,0) = Σ_j |ψ_j(t)⟩⟨ψ_j(0)|, and splits it into a path-ordered
//! holonomy factor and a reverse-time-ordered dynamic factor. It then checks
//! numerically that the dynamic generator F(t,0) is the same operator as
//! −iU†HU, so the "dynamic" factor is a function of U itself.
//!
//! ```
//! use holodyn::analysis::analyze;
//! use holodyn::linalg::Frame;
//! use holodyn::models::{HamiltonianModel, ModelConfig};
//!
//! let frame = Frame::basis(2, &[0]).unwrap();
//! let model = HamiltonianModel::spin_half_rotating(1.0, 0.3, 1.0, frame).unwrap();
//! let config = ModelConfig::new(model, 2.0, 400).unwrap();
//! let run = analyze(&config).unwrap();
//!
//! assert!(run.decomposition.residual_circularity <= 1e-12);
//! assert!(run.decomposition.residual_factorization < 1e-5);
//! ```
//!
//! The guide in `book/` walks through each piece; its code listings are
//! compiled and run as doctests of this crate.

pub mod analysis;
pub mod convergence;
pub mod decomposition;
pub mod error;
pub mod linalg;
pub mod models;
pub mod propagation;
pub mod report;
pub mod verify;

pub use error::{ConfigError, Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/propagation.md")]
    mod propagation {}
    #[doc = include_str!("../../../book/src/factors.md")]
    mod factors {}
    #[doc = include_str!("../../../book/src/circularity.md")]
    mod circularity {}
    #[doc = include_str!("../../../book/src/convergence.md")]
    mod convergence {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
