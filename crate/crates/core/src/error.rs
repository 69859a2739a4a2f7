use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between combined fields")]
    GridMismatch,

    #[error("non-finite sample at node ({x:.6}, {y:.6}, {z:.6})")]
    NonFinite { x: f64, y: f64, z: f64 },

    #[error("field has {got} samples, expected {expected}")]
    Length { expected: usize, got: usize },

    #[error("term stack is missing order index {0}")]
    MissingTerm(usize),

    #[error("order {0} is beyond the supported capacity ({1})")]
    Capacity(usize, usize),

    #[error("radicand floor breached at ({x:.4}, {y:.4}, {z:.4}): magnitude {magnitude:.6} against limit {limit:.6}")]
    Singular {
        x: f64,
        y: f64,
        z: f64,
        magnitude: f64,
        limit: f64,
    },

    #[error("fixed-point iteration diverged after {iterations} steps: {trace:?}")]
    Divergence { iterations: usize, trace: Vec<f64> },

    #[error("fixed-point iteration did not converge within {0} steps")]
    NoConvergence(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed field dump: {0}")]
    Dump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
