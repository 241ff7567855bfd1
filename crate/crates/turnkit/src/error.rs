use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// CSV header does not carry a required column.
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    /// CSV header present but malformed in some other way.
    #[error("schema error: {0}")]
    BadHeader(String),

    /// A data cell failed to parse. Row numbers are 1-based and count the
    /// header as row 1.
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    /// Timestamps must be strictly increasing.
    #[error("ordering error at row {row}: timestamps not strictly increasing")]
    NonMonotoneTime { row: usize },

    /// Input too short for the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A training corpus was empty.
    #[error("empty corpus")]
    EmptyCorpus,

    /// A model file or model parameter failed validation.
    #[error("model error: {0}")]
    Model(String),

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Contract violation inside the library.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
