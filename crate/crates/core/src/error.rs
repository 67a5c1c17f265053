use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{kind} `{id}` referenced by {context} does not exist")]
    DanglingReference {
        kind: &'static str,
        id: String,
        context: String,
    },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("optimization diverged: {0}")]
    Diverged(String),
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("empty gold set")]
    EmptyGold,
    #[error("bad model file: {0}")]
    ModelFormat(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
