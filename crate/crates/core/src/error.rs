use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("rotation is not in SO(3): orthogonality error {ortho:e}, det {det}")]
    InvalidRotation { ortho: f64, det: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("landmark {landmark} information block could not be factorized")]
    Factorization { landmark: usize },

    #[error("objective is not finite ({0})")]
    NonFinite(f64),

    #[error("no measurements selected by the design")]
    EmptyProblem,

    #[error("estimator diverged: cost {0}")]
    Diverged(f64),

    #[error("C({n}, {k}) = {count} subsets exceeds the enumeration guard {limit}")]
    EnumerationGuard {
        n: usize,
        k: usize,
        count: u128,
        limit: u128,
    },

    #[error("no manual preset for layout `{layout}` with K = {k}")]
    NoPreset { layout: String, k: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
