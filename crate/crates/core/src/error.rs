use chrono::{NaiveDate, NaiveDateTime};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("no weather sample for spot {spot} at hour {hour}")]
    MissingWeather { spot: String, hour: NaiveDateTime },

    #[error("dataset ends {available} but the fold scheme needs data through {needed} ({shortfall_days} days short)")]
    InsufficientRange {
        needed: NaiveDate,
        available: NaiveDate,
        shortfall_days: i64,
    },

    #[error("covariate path of train {train_id} is missing section {section}")]
    MissingSection { train_id: String, section: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("no trains observed at evaluation point {point} km")]
    UndefinedRate { point: f64 },

    #[error("singular information matrix; offending columns: {}", columns.join(", "))]
    SingularInformation { columns: Vec<String> },

    #[error("model not identifiable: {0}")]
    Unidentifiable(String),

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by the command line to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Parse,
    Validation,
    Convergence,
    Identifiability,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) => ErrorKind::Io,
            Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => ErrorKind::Parse,
            Error::InvalidInput(_)
            | Error::MissingWeather { .. }
            | Error::InsufficientRange { .. }
            | Error::MissingSection { .. }
            | Error::LengthMismatch { .. }
            | Error::UndefinedRate { .. } => ErrorKind::Validation,
            Error::NotConverged { .. } => ErrorKind::Convergence,
            Error::SingularInformation { .. } | Error::Unidentifiable(_) => ErrorKind::Identifiability,
        }
    }

    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }
}
