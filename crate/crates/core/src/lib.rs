//! Stable solvers for `A z = u` with an exact, ill-conditioned `A` and a noisy
//! right-hand side.
//!
//! * [`mpm`] — minimal pseudoinverse of an approximate matrix under a known
//!   matrix-error level `h`.
//! * [`mpmi`] — the inflation filter applied to the exact matrix, with the
//!   filter level chosen from the noise level by a discrepancy equation.
//! * [`baselines`] — truncated SVD, Tikhonov, and the Morozov-type variant.
//! * [`experiments`] — the Poisson-kernel model problem and seeded harness.
//!
//! Everything runs on a one-sided Jacobi [`svd`](svd::svd) computed once per
//! matrix.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod experiments;
pub mod io;
pub mod matrix;
pub mod mpm;
pub mod mpmi;
pub mod quartic;
pub mod report;
mod root;
pub mod svd;

pub use error::{Error, Result};
pub use matrix::{frobenius_norm, DenseMatrix, Vector};
pub use report::{Method, Parameter, SolveReport};
pub use root::GeneralizedRoot;
pub use svd::{svd, SvdFactors};
