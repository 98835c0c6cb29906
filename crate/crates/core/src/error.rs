use thiserror::Error;

pub type Result<T> = std::result::Result<T, TfmdError>;

#[derive(Debug, Error)]
pub enum TfmdError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The overlap-add denominator vanished, or a similar numerical breakdown.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl TfmdError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        TfmdError::InvalidArgument(msg.into())
    }
}
