use std::path::PathBuf;

/// Errors produced by code construction, decoders, oracles and the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("capacity exceeded: {what} (requested {requested}, limit {limit})")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) => 2,
            Error::Capacity { .. } => 3,
            Error::Parse { .. } => 4,
            Error::Io { .. } => 5,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
