use std::fmt;

use thiserror::Error;

/// Where in an input stream a parse failure happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// 1-based line number of a text input.
    Line(usize),
    /// 0-based record index and byte offset of a binary input.
    Record { index: u64, offset: u64 },
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(line) => write!(f, "line {line}"),
            Location::Record { index, offset } => {
                write!(f, "record {index} (byte offset {offset})")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("calibration error: {message} (residuals {residuals:?})")]
    Calibration {
        message: String,
        residuals: Vec<f64>,
    },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: Location, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn parse(location: Location, msg: impl Into<String>) -> Self {
        Error::Parse {
            location,
            message: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
