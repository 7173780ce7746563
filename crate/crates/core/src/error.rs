use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the feature and learning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient breaths: detected {found} cycle boundaries, need at least {needed}")]
    InsufficientBreaths { found: usize, needed: usize },

    #[error("point cloud too large for Rips persistence: {n} points exceeds cap {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("training set is empty after quality filtering")]
    EmptyTrainingSet,

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {msg}")]
    Schema { path: String, msg: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
