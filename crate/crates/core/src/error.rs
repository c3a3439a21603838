use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse grouping of errors, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFamily {
    Config,
    Ingest,
    Numerical,
    Other,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} is outside its domain (got {value})")]
    Domain { what: &'static str, value: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("relative error undefined: reference function has zero norm")]
    UndefinedMetric,

    #[error("eigen-solver did not converge after {steps} steps (last relative change {last_change:.3e})")]
    Convergence { steps: usize, last_change: f64 },

    #[error("finite-volume scheme produced a negative density {value:.3e} at step {step}")]
    Scheme { step: usize, value: f64 },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("sample is empty")]
    EmptySample,

    #[error("dilation inversion failed: {0}")]
    Inversion(String),

    #[error("|G*| is below the spectral threshold {threshold:e} on the whole frequency grid")]
    DegenerateSpectrum { threshold: f64 },

    #[error("bandwidth {h} needs frequencies up to {needed}, but the grid stops at {available}")]
    Bandwidth { h: f64, needed: f64, available: f64 },

    #[error("positivity projection left no mass")]
    Projection,

    #[error("oracle bandwidth selection needs the true density; use a fixed h3 instead")]
    OracleUnavailable,

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("need at least {needed} usable points for a slope, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: row {row}: {message}", path.display())]
    Ingest {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn family(&self) -> ErrorFamily {
        match self {
            Error::Config(_) => ErrorFamily::Config,
            Error::Ingest { .. } | Error::Csv(_) => ErrorFamily::Ingest,
            Error::Convergence { .. }
            | Error::Scheme { .. }
            | Error::Inversion(_)
            | Error::DegenerateSpectrum { .. }
            | Error::Bandwidth { .. }
            | Error::Projection
            | Error::UndefinedMetric
            | Error::Sampling(_)
            | Error::TooFewPoints { .. } => ErrorFamily::Numerical,
            Error::Domain { .. }
            | Error::Shape(_)
            | Error::EmptySample
            | Error::OracleUnavailable
            | Error::MissingInput(_)
            | Error::Io(_) => ErrorFamily::Other,
        }
    }
}
