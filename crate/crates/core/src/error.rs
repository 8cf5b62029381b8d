use thiserror::Error;

#[derive(Debug, Error)]
pub enum MacpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested exhaustive computation is larger than the configured cap.
    #[error("capacity exceeded: {what} needs {required}, cap is {cap}")]
    Capacity {
        what: String,
        required: u128,
        cap: u128,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, MacpError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(MacpError::InvalidArgument(msg.into()))
}
