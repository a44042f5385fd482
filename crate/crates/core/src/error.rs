use thiserror::Error;

/// Errors raised by estimation, selection and data loading.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("no usable samples: every row has zero norm")]
    EmptyInput,

    #[error("Tyler's M-estimator is not defined for p = {p} >= n = {n}")]
    NotDefined { p: usize, n: usize },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last step {last_step:e})")]
    NotConverged {
        iterations: usize,
        last_step: f64,
        last_iterate: Box<crate::ScatterMatrix>,
    },

    #[error("leave-one-out fit for sample {index} failed: {source}")]
    LeaveOneOut {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("evaluation at alpha = {alpha} failed: {source}")]
    AtAlpha {
        alpha: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("ragged input: row {row} has {found} columns, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("empty file: {0}")]
    EmptyFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that stem from the numerics rather than the inputs or the filesystem.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NotPositiveDefinite
            | Error::NotConverged { .. }
            | Error::NotDefined { .. }
            | Error::EmptyInput => true,
            Error::LeaveOneOut { source, .. } | Error::AtAlpha { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) | Error::Parse { .. } | Error::Ragged { .. } | Error::EmptyFile(_) => true,
            Error::LeaveOneOut { source, .. } | Error::AtAlpha { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
