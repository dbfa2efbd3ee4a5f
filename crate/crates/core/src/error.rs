use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver, the diagnostics and the harness.
#[derive(Debug, Error)]
pub enum KsfError {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("non-finite value {value} at index {index} ({context})")]
    NonFinite {
        context: &'static str,
        index: usize,
        value: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("negative density {value} at index {index} exceeds roundoff tolerance")]
    Domain { index: usize, value: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("quadrature failed to converge on [{a}, {b}]: estimate {estimate}, error {error_estimate}")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error_estimate: f64,
    },

    #[error("time step {dt} fell below dt_min {dt_min} at t = {t}")]
    TimeStepUnderflow { t: f64, dt: f64, dt_min: f64 },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl KsfError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        KsfError::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KsfError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, KsfError>;
