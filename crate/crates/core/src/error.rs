use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition of an operation was not met (shape mismatch, bad argument).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration field was unknown, missing, or malformed.
    #[error("config error in field `{field}`: {message}")]
    Config { field: String, message: String },

    /// Parameters or gradients became NaN/Inf.
    #[error("numerical failure: {0}")]
    NonFinite(String),

    /// The SNR threshold denominator vanished.
    #[error("threshold undefined: {0}")]
    Undefined(String),

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
