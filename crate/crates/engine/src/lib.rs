//! Symbolic-numeric engine for local equivariant index densities.
//!
//! The crate computes characteristic-form densities at fixed-point sets,
//! Mehler heat kernels of (form-valued) harmonic oscillators, a Getzler-
//! filtered Volterra symbol calculus on a Gaussian-closed symbol class, and
//! index pairings of finite-dimensional twisted spectral triples. Every
//! analytic formula is cross-checked against independent spectral oracles
//! on model geometries (flat tori, round spheres).
//!
//! Exact paths use Gaussian-rational coefficients so that nilpotent series
//! terminate with zero residual; numeric paths use `Complex64`.

pub mod charforms;
pub mod clifford;
pub mod density;
pub mod error;
pub mod exterior;
pub mod fixtures;
pub mod getzler;
pub mod matrix;
pub mod mehler;
pub mod oracle;
pub mod report;
pub mod scalar;
pub mod twisted;

pub use error::{EngineError, Result};
pub use exterior::MultiVector;
pub use scalar::{Coeff, GaussianRational, Rat};
