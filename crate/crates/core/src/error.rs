use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, class indices or other arguments that violate an operation's
    /// preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is out of range or unsatisfiable.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or unsupported file content.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An attack produced a non-finite cost. Carries the last iterate whose
    /// cost was finite so callers can still inspect or export it.
    #[error("numerical failure after {iteration} iterations: {message}")]
    Numerical {
        iteration: usize,
        message: String,
        last_finite: Vec<f64>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user-supplied configuration rather than by
    /// the run itself.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidInput(_))
    }
}

macro_rules! invalid {
    ($($arg:tt)*) => { $crate::error::Error::InvalidInput(format!($($arg)*)) };
}

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(format!($($arg)*)) };
}

pub(crate) use config_err;
pub(crate) use invalid;
