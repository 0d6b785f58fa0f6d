use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("row {row} has zero degree (missing self-loop?)")]
    ZeroDegree { row: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable, machine-readable error category.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::ZeroDegree { .. } | Error::NonFinite { .. } => "numeric",
            Error::Invalid(_) => "invalid-input",
            Error::Config(_) => "config",
            Error::Parse { .. } | Error::Dataset(_) => "dataset",
            Error::Io { .. } => "io",
            Error::Json(_) => "serialization",
        }
    }

    /// Process exit code for the CLI; never zero.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "dataset" => 3,
            "io" => 4,
            "numeric" => 5,
            "shape" => 6,
            "invalid-input" => 7,
            _ => 1,
        }
    }
}
