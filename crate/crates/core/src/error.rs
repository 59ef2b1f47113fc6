use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid quantum numbers: {0}")]
    QuantumNumbers(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("norm drift {drift:.3e} exceeds {limit:.1e} at cycle {cycle}")]
    NormDrift { drift: f64, limit: f64, cycle: usize },

    #[error("trajectory {id}: step size underflow at t = {t:.6e} a.u. (r = {r:.3e})")]
    StepUnderflow { id: u64, t: f64, r: f64 },

    #[error("curve error: {0}")]
    Curve(String),

    #[error("weights inconsistent: {0}")]
    Weights(String),

    #[error("checkpoint {path}: {msg}")]
    Checkpoint { path: PathBuf, msg: String },

    #[error("cache {path}: {msg}")]
    Cache { path: PathBuf, msg: String },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("task {task} failed after {attempts} attempts: {msg}")]
    TaskFailed { task: String, attempts: usize, msg: String, numerical: bool },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NormDrift { .. } | Error::StepUnderflow { .. } => true,
            Error::TaskFailed { numerical, .. } => *numerical,
            _ => false,
        }
    }
}
