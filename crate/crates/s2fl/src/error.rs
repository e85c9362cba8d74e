//! Error type covering file formats, parsing, and the numeric core.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] s2fl_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Structural problem in a file: wrong magic, truncated payload,
    /// missing manifest key.
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    /// Cell-level problem in a text file. Row and column are 1-based.
    #[error("{path}:{row}:{col}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        message: String,
    },

    /// Bad argument or configuration outside the numeric core.
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Stable machine-readable code for the CLI's error prefix.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Core(s2fl_core::Error::SubspaceDim { .. }) => "INVALID_DS",
            Error::Core(s2fl_core::Error::Dimension(_)) => "DIMENSION",
            Error::Core(s2fl_core::Error::Validation(_)) => "VALIDATION",
            Error::Core(s2fl_core::Error::NonFinite { .. }) => "NUMERIC",
            Error::Io { .. } => "IO",
            Error::Format { .. } => "FORMAT",
            Error::Parse { .. } => "PARSE",
            Error::Invalid(_) => "VALIDATION",
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
