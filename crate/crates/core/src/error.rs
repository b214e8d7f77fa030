use thiserror::Error;

#[derive(Debug, Error)]
pub enum BwkError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("lp error: {0}")]
    Lp(String),
    #[error("instance violates the nondegeneracy assumption: {0}")]
    Degenerate(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BwkError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(BwkError::InvalidArgument(msg.into()))
}
