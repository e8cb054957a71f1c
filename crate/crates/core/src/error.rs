use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A pool file could not be parsed. `line` is 1-based and counts the header;
    /// `column` is 1-based and counts the `region_id` column.
    #[error("pool parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested draw cannot be made from the pool.
    #[error("infeasible sampling scheme: {0}")]
    Infeasible(String),

    #[error("configuration index {index} out of range (pool has {count} configurations)")]
    ConfigOutOfRange { index: usize, count: usize },

    /// A statistic is undefined for the supplied data (zero variance, single region, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the filesystem rather than by the data or flags.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
