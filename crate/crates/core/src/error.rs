use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: Option<PathBuf>,
        #[source]
        source: io::Error,
    },

    #[error("malformed NIfTI file: {0}")]
    Format(String),

    #[error("unsupported NIfTI feature: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("geometry mismatch: {0}")]
    Alignment(String),

    #[error("empty population: {0}")]
    EmptyPopulation(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: Some(path.into()),
            source,
        }
    }

    /// Process exit code for this error class.
    ///
    /// 2 = config, 3 = I/O, 4 = geometry mismatch, 5 = insufficient data,
    /// 6 = numeric precondition.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Format(_) | Error::Unsupported(_) => 3,
            Error::Alignment(_) => 4,
            Error::EmptyPopulation(_) | Error::InsufficientData(_) => 5,
            Error::Parameter(_) | Error::Precondition(_) => 6,
        }
    }
}

impl From<io::Error> for Error {
    fn from(source: io::Error) -> Self {
        Error::Io { path: None, source }
    }
}
