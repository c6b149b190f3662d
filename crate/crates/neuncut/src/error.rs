use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// A malformed line in a text input file.
#[derive(Debug, Error)]
#[error("{path}:{line}: {message}")]
pub struct ParseError {
    pub path: PathBuf,
    /// 1-based.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] neuncut_core::Error),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// 2 for numerical breakdown, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
