use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented constraint. `field` names the offending input.
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("cylinder out of range: {0}")]
    CylinderOutOfRange(String),

    #[error("cylinder contains no grid nodes")]
    EmptyCylinder,

    #[error("newton iteration did not converge at step {step}: residual {residual:.3e} after {iterations} iterations")]
    NewtonDivergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    /// The Newton system lost positive definiteness; impossible for a regularized problem.
    #[error("singular newton system at step {step}: {detail}")]
    SingularSystem { step: usize, detail: String },

    #[error("input is not from a converged solve: {0}")]
    NotConverged(String),

    #[error("malformed field file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
