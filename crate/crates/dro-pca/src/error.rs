//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DroPcaError {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("matrix is not orthonormal: ||X'X - I||_F = {feasibility:.3e} exceeds the 1e-6 repair limit")]
    NotOnManifold { feasibility: f64 },

    #[error("matrix is not tangent at the base point: ||X'V + V'X||_F = {violation:.3e}")]
    NotTangent { violation: f64 },

    #[error("covariance has eigenvalue {min_eigenvalue:.3e} below the -1e-6 rejection threshold")]
    IndefiniteCovariance { min_eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "tangent subproblem stalled: constraint residual {residual:.3e} after {iterations} iterations (tol {tol:.3e})"
    )]
    SubproblemStalled {
        residual: f64,
        iterations: usize,
        tol: f64,
    },

    #[error("line search exhausted {backtracks} backtracks at outer iteration {iteration}")]
    LineSearchFailed { iteration: usize, backtracks: u32 },

    #[error("descent audit failed at iteration {iteration}: {detail}")]
    DescentAudit { iteration: usize, detail: String },

    #[error("sample set is empty")]
    EmptySampleSet,

    #[error("csv error in {path}: {detail}")]
    Csv { path: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DroPcaError>;
