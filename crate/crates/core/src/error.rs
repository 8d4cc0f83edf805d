use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("price series has a gap or duplicate at {timestamp} (line {line})")]
    Gap { timestamp: String, line: usize },

    #[error("price series too short: {len} hours, need at least {required}")]
    SeriesTooShort { len: usize, required: usize },

    #[error("invalid price data: {0}")]
    InvalidPrices(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("price window ending at hour {end_index} needs 23 hours of lookback")]
    InsufficientLookback { end_index: usize },

    #[error("episode is already done")]
    EpisodeDone,

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("linear program is infeasible: {0}")]
    Infeasible(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
