//! Numerical laboratory for the nonlinear Schrödinger equation with a
//! one-dimensional harmonic confinement,
//!
//! ```text
//! i∂_t u = -Δu + x_N² u - |u|^{p-1} u,   x ∈ ℝ^N,
//! ```
//!
//! covering ground states on the Nehari manifold, split-step evolution, the
//! transverse virial identity and certificates of finite-time blow-up for
//! scaled ground states.

// `!(x > 0.0)` is the NaN-rejecting form of a positivity check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod field;
pub mod functionals;
pub mod grid;
pub mod ground_state;
pub mod samples;
pub mod spectral;

pub use error::{Error, Result};
pub use field::Field;
pub use functionals::ModelParams;
pub use grid::Grid;
