use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("parse error at byte offset {offset}: {message}")]
    ParseOffset { offset: u64, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("vocabulary is empty after counting and pruning")]
    EmptyVocabulary,
    #[error("vocabulary of {len} terms is not a multiple of shard dimension {shard_dim}")]
    Alignment { len: usize, shard_dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite value at cell ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("training diverged at step {step}")]
    Diverged { step: usize },
    #[error("merge error: {0}")]
    Merge(String),
    #[error("insufficient coverage: {scored} of {total} items could be evaluated")]
    InsufficientCoverage { scored: usize, total: usize },
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("out-of-vocabulary word: {0}")]
    OutOfVocabulary(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
