use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid item `{item_id}`: {reason}")]
    InvalidItem { item_id: String, reason: String },

    #[error("response for `{response}` paired with item `{item}`")]
    ItemMismatch { response: String, item: String },

    #[error("log-likelihood undefined: probability {probability} for item `{item_id}` contradicts its response")]
    Domain { item_id: String, probability: f64 },

    #[error("divergent estimate: {0}; use MAP estimation instead")]
    DivergentEstimate(String),

    #[error("invalid response matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("item bank exhausted")]
    BankExhausted,

    #[error("oracle has no answer for item `{0}`")]
    MissingAnswer(String),

    #[error("{0}")]
    Metric(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
