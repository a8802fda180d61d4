use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the extraction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("review `{review_id}`: {message}")]
    InvalidReview { review_id: String, message: String },

    #[error("duplicate review id `{0}`")]
    DuplicateId(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("records not adjudicated: {}", .0.join(", "))]
    Unadjudicated(Vec<String>),

    #[error("adjudication needs at least 2 annotation records, got {0}")]
    TooFewAnnotators(usize),

    #[error("span [{start}, {end}) out of bounds for text of length {len}")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("embedding store has no entry for review `{0}`")]
    MissingEmbedding(String),

    #[error("embedding store entry for `{review_id}` has {stored} tokens, text has {expected}")]
    TokenCountMismatch {
        review_id: String,
        stored: usize,
        expected: usize,
    },

    #[error("span scorer failed on interval [{start}, {end}]: {message}")]
    Scorer {
        start: usize,
        end: usize,
        message: String,
    },

    #[error("degenerate training data: {0}")]
    Degenerate(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("model bundle: {0}")]
    Bundle(String),

    #[error("digest mismatch: bundle has {bundle}, config has {config}")]
    DigestMismatch { bundle: String, config: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid UTF-8 at byte offset {0}")]
    Utf8(usize),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True when the error stems from bad input rather than the environment.
    ///
    /// The CLI maps validation failures to exit code 1 and everything else to 2.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Io { .. } => false,
            Error::Fold { source, .. } | Error::Stage { source, .. } => source.is_validation(),
            _ => true,
        }
    }
}
