use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("infeasible start: initial gap {gap} m must exceed delta/xi = {required} m")]
    InfeasibleStart { gap: f64, required: f64 },

    #[error("objective is not finite at u = {u}")]
    NonFiniteObjective { u: f64 },

    #[error("control {u} lies outside [{u_min}, {u_max}] (tolerance {tol})")]
    OutOfBounds {
        u: f64,
        u_min: f64,
        u_max: f64,
        tol: f64,
    },

    #[error("shooting did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("sample grids differ: {0}")]
    HorizonMismatch(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the scenario description rather than the filesystem.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::InfeasibleStart { .. } | Error::Parse(_)
        )
    }
}
