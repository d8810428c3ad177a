//! Decomposition of a covariance matrix into a sparse Gaussian Markov
//! component (sparse precision matrix) plus a sparse residual covariance.
//!
//! The estimator minimizes `<S, J> - log det J + gamma * ||J||_1,off` over
//! positive definite `J` subject to the element-wise box constraint
//! `||J||_inf,off <= lambda`; the residual covariance is recovered from the
//! box multipliers. The crate bundles:
//!
//! - dense symmetric linear algebra ([`matrix`]),
//! - model types and support-set combinatorics ([`model`]),
//! - synthetic ground-truth generation on grid graphs ([`synth`]),
//! - Gaussian sampling and the sample covariance ([`sampling`]),
//! - the proximal-gradient solver and KKT certificates ([`solver`]),
//! - identifiability/incoherence condition checks ([`assumptions`]),
//! - Gaussian loopy belief propagation diagnostics ([`inference`]),
//! - estimation metrics ([`metrics`]),
//! - a command-line harness ([`cli`]).

pub mod assumptions;
pub mod cli;
pub mod error;
pub mod inference;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{DenseMatrix, SymmetricMatrix};
