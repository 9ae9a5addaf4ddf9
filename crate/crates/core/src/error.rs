use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Hurst parameter must lie in the open interval (1/2, 1), got {0}")]
    InvalidHurst(f64),

    #[error("time horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),

    /// An argument outside the domain of a function.
    #[error("{op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// Evaluation on (or too close to) the diagonal where the quantity is singular.
    #[error("{op}: singular at s = t (s = {s}, t = {t})")]
    Singular { op: &'static str, s: f64, t: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value produced by path (seed {seed}, path_index {path_index})")]
    NonFinite { seed: u64, path_index: u64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Validation errors map to CLI exit code 1, everything else to 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidHurst(_)
                | Error::InvalidHorizon(_)
                | Error::Domain { .. }
                | Error::Singular { .. }
                | Error::Config(_)
                | Error::Json(_)
        )
    }
}
