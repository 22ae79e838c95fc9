use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the simulator, network, trainer and evaluator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("scenario generation failed after {attempts} attempts: {reason}")]
    ScenarioGeneration { attempts: usize, reason: String },

    #[error("shape mismatch for {what}: expected {expected}, got {actual}")]
    Shape {
        what: String,
        expected: String,
        actual: String,
    },

    #[error("non-finite activation in {tensor}")]
    NonFinite { tensor: String },

    #[error("non-finite loss in minibatch {minibatch} (epoch {epoch})")]
    NonFiniteLoss { epoch: usize, minibatch: usize },

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("env {index}: {source}")]
    Env {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("csv line {line}: {reason}")]
    Csv { line: u64, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(
        what: impl Into<String>,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::Shape {
            what: what.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
