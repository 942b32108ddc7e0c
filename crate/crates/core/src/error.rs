use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("column `{0}` declared in the configuration is absent from the header")]
    MissingColumn(String),

    #[error("row {row}: unknown level `{value}` for column `{column}`")]
    UnknownLevel {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: cannot parse `{value}` as a number in column `{column}`")]
    InvalidNumber {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: response is missing")]
    MissingResponse { row: usize },

    #[error("group `{0}` has no rows")]
    EmptyGroup(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid null sample file: {0}")]
    NullFile(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
