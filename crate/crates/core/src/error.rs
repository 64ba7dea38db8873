use thiserror::Error;

use crate::solver::Solution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dataset has no observations")]
    EmptyDataset,

    #[error("unknown group `{0}`")]
    UnknownGroup(String),

    /// The data admits no meaningful fit (constant response, zero `lambda_max`, ...).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("solver did not converge after {iterations} sweeps (KKT residual {kkt_residual:.3e})")]
    NoConvergence {
        iterations: usize,
        kkt_residual: f64,
        last: Box<Solution>,
    },

    #[error("malformed input `{path}`: {message}")]
    Malformed { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn malformed(path: impl AsRef<std::path::Path>, msg: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.as_ref().display().to_string(),
            message: msg.into(),
        }
    }

    /// True for failures of the numerical procedure rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NoConvergence { .. })
    }
}
