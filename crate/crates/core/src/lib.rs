//! Nonasymptotic hypothesis tests and confidence regions for regression
//! coefficients.
//!
//! The test statistic is `Ψ_q(θ̂) = ‖(1/n) Σ_i X_i [Y_i − g(V_i; θ̂)]‖_q`, where
//! `θ̂` minimizes a nonnegative slack over the restricted parameter set, and
//! critical values come from Gaussian (or Rademacher) concentration around a
//! Monte-Carlo estimate of the expected noise norm.

pub mod error;
pub mod exec;
pub mod expr;
pub mod farkas;
pub mod inference;
pub mod lp;
pub mod norms;
pub mod rng;
pub mod sim;
pub mod solver;
pub mod special;
pub mod thresholds;

pub use error::{Error, Result};
