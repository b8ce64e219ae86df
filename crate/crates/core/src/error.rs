use thiserror::Error;

/// Errors produced by the modem library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing configuration key `{0}`")]
    MissingKey(String),
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("sample-rate ratio {ratio} is not an integer")]
    NonIntegerRatio { ratio: f64 },
    #[error("signal too short: need {needed} samples, have {available}")]
    SignalTooShort { needed: usize, available: usize },
    #[error("sync not found (confidence {confidence:.3} below threshold {threshold:.3})")]
    SyncNotFound { confidence: f64, threshold: f64 },
    #[error("{0}")]
    Estimation(String),
    #[error("bad capture header: {0}")]
    BadHeader(String),
    #[error("truncated capture: expected {expected} samples, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("empty input")]
    EmptyInput,
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
