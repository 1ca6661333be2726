use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value while evaluating {0}")]
    NonFinite(&'static str),

    #[error("iteration diverged at step {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("degenerate gradient window: all stored gradients are zero")]
    DegenerateWindow,

    #[error("ratio undefined for a zero vector")]
    UndefinedRatio,

    #[error("effective condition number undefined: every shaped eigenvalue is zero")]
    UndefinedConditionNumber,

    #[error("cannot instrument run: {0}")]
    CannotInstrument(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("stiffness system is singular; boundary conditions are ill-posed")]
    IllPosedBoundary,

    #[error("volume budget {budget} infeasible for {n} elements with density floor {x_min}")]
    InvalidBudget { budget: f64, n: usize, x_min: f64 },

    #[error("schema error in {path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
