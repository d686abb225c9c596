use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("path exceeded the hard cap of {max_steps} steps without stopping")]
    CapExceeded { max_steps: usize },

    #[error("flow lost monotonicity at step {step} between initial points {index} and {next}")]
    Monotonicity {
        step: usize,
        index: usize,
        next: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{what} at {at} lies outside the region where the local time exceeds the floor")]
    Domain { what: &'static str, at: f64 },

    #[error("quadrature did not converge (estimate {estimate}, error {error})")]
    Quadrature { estimate: f64, error: f64 },

    #[error("statistical test: {0}")]
    Stats(String),

    #[error("config line {line}: {key}: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
