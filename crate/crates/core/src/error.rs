use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: estimated error {err:e} after {intervals} intervals")]
    Quadrature {
        lo: f64,
        hi: f64,
        err: f64,
        intervals: usize,
    },

    #[error("equilibrium bracket failure: {0}")]
    Bracket(String),

    #[error("non-finite value in {field} at node {node}, t = {t}")]
    NonFinite { field: &'static str, node: usize, t: f64 },

    #[error("negative value {value:e} in {field} at node {node}, t = {t} (dt too large?)")]
    Negative {
        field: &'static str,
        node: usize,
        t: f64,
        value: f64,
    },

    #[error("monotone iteration broke monotonicity at iteration {iteration}, node {node} (increase {increase:e})")]
    NonMonotone {
        iteration: usize,
        node: usize,
        increase: f64,
    },

    #[error("iteration cap of {0} exceeded")]
    IterationCap(usize),

    #[error("wall-clock budget of {0} s exceeded")]
    Budget(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("window [{lo}, {hi}] lies outside the data range [{data_lo}, {data_hi}]")]
    Window {
        lo: f64,
        hi: f64,
        data_lo: f64,
        data_hi: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("property violation: {0}")]
    Property(String),

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
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 numerical, 4 property violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parameter(_) => 2,
            Error::Property(_) => 4,
            Error::Io { .. } | Error::Format { .. } => 1,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
