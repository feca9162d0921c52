use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input lies outside the domain of the formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or incomplete configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// CSV content that could not be interpreted. `row` counts data rows from 1,
    /// not including the header.
    #[error("parse error in {source_id} at row {row}: {message}")]
    Parse {
        source_id: String,
        row: usize,
        message: String,
    },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    /// Liquidation falls beyond the end of the available history.
    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
