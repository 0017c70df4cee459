use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid post on line {line}: {reason}")]
    InvalidPost { line: usize, reason: String },

    #[error("duplicate post id `{0}`")]
    DuplicatePostId(String),

    #[error("every document is empty after applying min_df")]
    AllDocumentsEmpty,

    #[error("seed term `{0}` appears in both attitude sections")]
    OverlappingSeedTerm(String),

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("category hierarchy contains a cycle through category {0}")]
    Cycle(u32),

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("unknown term `{0}`")]
    UnknownTerm(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative entry {value} at ({row}, {col})")]
    NonNegativityViolation { row: usize, col: usize, value: f64 },

    #[error("topic {0} has an all-zero term row")]
    DegenerateTopic(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("group has no tweets")]
    EmptyGroup,

    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("attribute is constant on one side of the edge list (or fewer than two usable edges)")]
    DegenerateAttribute,

    #[error("need at least two points, got {0}")]
    InsufficientData(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
