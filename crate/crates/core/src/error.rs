use std::fmt;

use thiserror::Error;

/// Errors raised by the geometry, discretization and solver layers.
#[derive(Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("assembly error at node {node} (r = {r}): {reason}")]
    Assembly { node: usize, r: f64, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("operator is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e}, value {value})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        value: f64,
        /// Best iterate reached, as nodal values.
        best: Vec<f64>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

// Hand-written so that a non-convergence report does not dump the whole
// best iterate.
impl fmt::Debug for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonConvergence { iterations, residual, value, best } => f
                .debug_struct("NonConvergence")
                .field("iterations", iterations)
                .field("residual", residual)
                .field("value", value)
                .field("best_len", &best.len())
                .finish(),
            other => write!(f, "{other}"),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
