use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Jsonl { line: usize, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed tokenizer file: {0}")]
    Format(String),

    #[error("unsupported tokenizer format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("{0}")]
    InvalidInput(String),

    #[error("unknown token id {0}")]
    UnknownTokenId(crate::TokenId),

    #[error("pair ({0}, {1}) not present in pair table")]
    PairAbsent(crate::TokenId, crate::TokenId),

    #[error("only {removed} of {requested} tokens could be pruned: no prunable leaves remain")]
    PruneExhausted { removed: usize, requested: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
