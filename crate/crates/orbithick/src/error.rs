use thiserror::Error;

#[derive(Debug, Error)]
pub enum OrbiError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not a Lorentz matrix: |L^T J L - J| = {defect:.3e} exceeds tol {tol:.3e}")]
    NotLorentz { defect: f64, tol: f64 },

    #[error("classification unresolved: {detail} (margins: {margins:?})")]
    UnresolvedClassification { detail: String, margins: Vec<f64> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical overflow near the boundary: {0}")]
    BoundaryOverflow(String),

    #[error("word ball explosion: {count} elements exceeds cap {cap}")]
    ExplosionGuard { count: usize, cap: usize },

    #[error("point is thin (witness displacement {displacement:.6} < level {level:.6})")]
    PointIsThin { displacement: f64, level: f64 },

    #[error("bisection failed to bracket: {0}")]
    BisectionFailed(String),

    #[error("certified failure: {0}")]
    CertifiedFailure(String),

    #[error("indeterminate geometry: {0}")]
    Indeterminate(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, OrbiError>;
