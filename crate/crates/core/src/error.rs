use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed, inconsistent or out-of-order input data.
    #[error("data error: {0}")]
    Data(String),

    /// Scans handed to windowing were not sorted by timestamp.
    #[error("scan timestamps not monotonic: {previous} followed by {next}")]
    DataOrder { previous: f64, next: f64 },

    /// The similarity/distance model could not be fitted.
    #[error("model fit failed: {0}")]
    ModelFit(String),

    /// A query was issued against a model without bins.
    #[error("similarity/distance model has no bins")]
    EmptyModel,

    /// Parse failure in one of the text formats.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
