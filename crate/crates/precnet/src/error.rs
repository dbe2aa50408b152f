//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A Cholesky pivot fell below the positive-definiteness tolerance.
    #[error("matrix is not positive definite (pivot {pivot} failed)")]
    NotPositiveDefinite { pivot: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid penalty weight: {0}")]
    InvalidWeight(String),

    /// A cross-validation fold came out empty (more folds than samples).
    #[error("degenerate cross-validation fold")]
    DegenerateFold,

    #[error("empty input")]
    EmptyInput,

    #[error("degenerate class: {0}")]
    DegenerateClass(String),

    /// Two sampled points coincided exactly while building a geometric graph.
    #[error("degenerate geometry: sampled points coincide")]
    DegenerateGeometry,

    #[error("negative count at row {row}, column {col}")]
    NegativeCount { row: usize, col: usize },
}
