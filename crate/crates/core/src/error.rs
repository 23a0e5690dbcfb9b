use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension { context: String, expected: String, found: String },

    #[error("{what} index {index} out of range (bound {bound})")]
    Index { what: &'static str, index: usize, bound: usize },

    #[error("malformed input at line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("parse error at line {line}, field {field}: cannot parse {token:?} ({message})")]
    Parse { line: usize, field: usize, token: String, message: String },

    #[error("unseen token {token:?} in field {field} and no unknown slot reserved")]
    UnknownToken { field: usize, token: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("non-finite value at step {step} (batch {batch}) in {tensor}")]
    NonFinite { step: usize, batch: usize, tensor: String },

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn dim(context: impl Into<String>, expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension { context: context.into(), expected: expected.to_string(), found: found.to_string() }
    }
}
