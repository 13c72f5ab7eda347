//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file (mesh or config).
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A constructed or loaded object violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A caller-supplied argument is out of its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Numerically singular pivot encountered during factorization.
    #[error("singular matrix: |pivot| = {pivot:.3e} at elimination step {index}")]
    Singular { index: usize, pivot: f64 },

    /// Iterative solver did not reach the requested tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A shifted solve hit (or nearly hit) a discrete eigenvalue.
    #[error("shift {lambda} lies in the discrete spectrum")]
    SpectrumHit { lambda: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
