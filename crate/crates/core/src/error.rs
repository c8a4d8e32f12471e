use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid grasp: {0}")]
    InvalidGrasp(String),
    #[error("invalid depth at pixel ({u}, {v})")]
    InvalidDepth { u: usize, v: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("model incompatible with input: {0}")]
    ModelCompat(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("no grasp candidates")]
    NoGrasp,
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
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
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 configuration, 3 data, 4 numeric divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) => 2,
            Error::Divergence { .. } => 4,
            _ => 3,
        }
    }
}
