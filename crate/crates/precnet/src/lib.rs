//! Sparse precision matrix estimation for Gaussian graphical models via
//! penalized likelihood, with lasso, SCAD and adaptive-lasso penalties.
//!
//! Nonconvex penalties are handled through a local linear approximation that
//! reduces each step to a weighted-L1 problem, solved by a block coordinate
//! descent graphical lasso generalized to per-element weights. On top of the
//! solver sit cross-validated tuning, simulation benchmarks over known
//! network structures, and two downstream applications: conditional Gaussian
//! forecasting and penalized linear discriminant analysis.

pub mod applications;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod glasso;
pub mod linalg;
pub mod penalties;
pub mod simgen;

pub use error::{Error, Result};
