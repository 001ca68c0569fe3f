use thiserror::Error;

/// Errors produced by estimator, optimizer, and testbed operations.
#[derive(Debug, Error)]
pub enum IgtError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The gradient sample was not measured at the point the estimator asked for.
    #[error("query contract violated: update at step {expected} received a sample tagged for step {got}")]
    QueryContract { expected: u64, got: u64 },

    #[error("all {0} trajectories were discarded by the gradient filter")]
    AllTrajectoriesDiscarded(usize),

    #[error("matrix is singular or not positive definite")]
    SingularMatrix,

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, IgtError>;
