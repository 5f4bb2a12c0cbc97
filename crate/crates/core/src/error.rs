use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A value lies outside its mathematical domain (load factor, probability, capacity).
    #[error("domain error: {0}")]
    Domain(String),

    /// Switch state and loads disagree, or an update would make a load negative.
    #[error("inconsistent state: {0}")]
    Inconsistent(String),

    /// A transition would push an offload sink above full load.
    #[error("infeasible transition: {0}")]
    Infeasible(String),

    #[error("degenerate distance: {0}")]
    DegenerateDistance(String),

    #[error("insufficient neighbors: need {needed}, have {available}")]
    InsufficientNeighbors { needed: usize, available: usize },

    #[error("degenerate dataset: {0}")]
    Normalization(String),

    #[error("problem too large: {0}")]
    Size(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("iteration {iteration}, slot {slot}: {source}")]
    AtSlot {
        iteration: usize,
        slot: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
