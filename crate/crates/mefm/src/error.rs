//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a documented precondition (non-finite entries,
    /// negative weights, out-of-range probabilities, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Array shapes do not line up.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    /// Input is degenerate for the requested operation (e.g. an all-zero
    /// residual series passed to the loading estimator).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A model identification condition does not hold (per-time minima of the
    /// main effects must be exactly zero and all entries nonnegative).
    #[error("identification condition violated: {0}")]
    Identification(String),

    /// The generalized-lasso solver exhausted its sweep budget. Carries the
    /// best iterate so callers can inspect or salvage it.
    #[error(
        "solver did not converge at lambda={lambda:.6e}: kkt residual {residual:.3e} after {sweeps} sweeps"
    )]
    NonConvergence {
        lambda: f64,
        residual: f64,
        sweeps: usize,
        best: Box<crate::dafl::GenLassoSolution>,
    },

    /// One or more per-index solves failed inside a multi-series fit; the
    /// remaining series were still processed.
    #[error("{} of {total} series failed (indices {indices:?}); first: {first_error}", indices.len())]
    SeriesFailures {
        total: usize,
        indices: Vec<usize>,
        first_error: String,
    },
}
