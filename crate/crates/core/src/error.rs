use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {message}")]
    Parse { row: u64, message: String },
    #[error("row {row}: duplicate x={x} for curve `{curve}`")]
    DuplicatePoint { curve: String, x: f64, row: u64 },
    #[error("curve `{curve}` has {len} points, at least {min} required")]
    TooShort { curve: String, len: usize, min: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("trend filter did not converge after {iterations} iterations (KKT residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("empty segment: basis column {column} has no support on the data")]
    EmptySegment { column: usize },
    #[error("k={k} exceeds the number of distinct rows ({distinct})")]
    TooManyClusters { k: usize, distinct: usize },
    #[error("label {label} outside 0..{n_clusters}")]
    UnknownLabel { label: usize, n_clusters: usize },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

/// Coarse classification used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
    Internal,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::DuplicatePoint { .. }
            | Error::TooShort { .. }
            | Error::InvalidInput(_)
            | Error::TooManyClusters { .. }
            | Error::UnknownLabel { .. } => ErrorClass::Input,
            Error::NonConvergence { .. } | Error::EmptySegment { .. } => ErrorClass::Numerical,
            Error::Invariant(_) => ErrorClass::Internal,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
