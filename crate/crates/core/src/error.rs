use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative defect {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("user index {index} out of range for {users} users")]
    IndexOutOfRange { index: usize, users: usize },
    #[error("rank-deficient effective pilot: {0}")]
    RankDeficient(String),
    #[error("infeasible point: {0}")]
    Infeasible(String),
    #[error("line search failed: {0}")]
    LineSearch(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
