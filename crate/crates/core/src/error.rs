use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty sequence passed to {0}")]
    EmptySequence(&'static str),

    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: u32, size: usize },

    #[error("game spec syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown reference: {0}")]
    UnknownReference(String),

    #[error("duplicate id: {0}")]
    DuplicateId(String),

    #[error("invalid game spec: {0}")]
    InvalidSpec(String),

    #[error("walkthrough reaches score {reached}, expected max_score {expected}")]
    WalkthroughMismatch { reached: i64, expected: i64 },

    #[error("invalid action: {0:?}")]
    InvalidAction(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("replay buffer holds {size} transitions, cannot sample a batch of {batch}")]
    InsufficientSamples { size: usize, batch: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{0}")]
    Invalid(String),

    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
