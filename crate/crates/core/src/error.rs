use thiserror::Error;

/// Errors produced by the forecasting library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite numeric input: {0}")]
    NonFinite(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("unsupported model format version {found} (this build reads version {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("model file corrupt: {0}")]
    Corrupt(String),

    #[error("model shape inconsistency: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
