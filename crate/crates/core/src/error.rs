use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
    #[error("forward cache does not belong to this network state")]
    StaleCache,
    #[error("operation requires the {expected} Q-function variant, got {got}")]
    WrongVariant { expected: &'static str, got: &'static str },
    #[error("value {value} outside bounds [{min}, {max}] at index {index}")]
    OutOfBounds {
        index: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("not enough samples: have {have}, need {need}")]
    InsufficientSamples { have: usize, need: usize },
    #[error("step called on a terminated episode; call reset first")]
    StepAfterTerminal,
    #[error("operation not supported: {0}")]
    Unsupported(&'static str),
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { context, expected, got })
    }
}
