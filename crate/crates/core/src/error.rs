use thiserror::Error;

/// Errors surfaced by corpus ingestion, sampling, training and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("instance {id}: entity span out of bounds")]
    SpanOutOfBounds { id: String },

    #[error("instance {id}: entity spans overlap")]
    SpanOverlap { id: String },

    #[error("duplicate id {id}")]
    DuplicateId { id: String },

    #[error("embedding for {id} has dimension {found}, expected {expected}")]
    EmbeddingDimension {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in embedding {id}")]
    NonFinite { id: String },

    #[error("missing embedding for instance {id}")]
    MissingEmbedding { id: String },

    #[error("vector dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("empty support set")]
    EmptySupport,

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("sampling: {0}")]
    Sampling(String),

    #[error("constraint check: {0}")]
    ConstraintCheck(String),

    #[error("training: {0}")]
    Training(String),

    /// Training aborted because the loss or a parameter went non-finite.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("evaluation: {0}")]
    Evaluation(String),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: &std::path::Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
