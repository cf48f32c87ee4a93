use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, RaatError>;

#[derive(Debug, Error)]
pub enum RaatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate query id {0:?}")]
    DuplicateId(String),

    #[error("{0}")]
    Data(String),

    #[error("insufficient records for {tag} {split}: requested {requested}, available {available} (short by {})", requested - available)]
    Shortfall {
        tag: String,
        split: String,
        requested: usize,
        available: usize,
    },

    #[error("token id {id} out of range for vocabulary of size {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },

    #[error("non-finite loss on example {example_id}: {detail}")]
    NonFinite { example_id: String, detail: String },

    #[error("gradient check failed: max relative error {max_rel_err:e} >= {tolerance:e}")]
    GradCheck { max_rel_err: f64, tolerance: f64 },

    #[error("predictions missing for {} example(s): {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),

    #[error("{0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl RaatError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RaatError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 1 usage/config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            RaatError::Config(_) => 1,
            RaatError::NonFinite { .. } | RaatError::GradCheck { .. } => 3,
            _ => 2,
        }
    }
}
