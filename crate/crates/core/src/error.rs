use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("trajectory shorter than 2 states ({id})")]
    TooShort { id: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid trajectory {id}: {message}")]
    InvalidTrajectory { id: String, message: String },

    #[error("downsample factor {factor} too large for trajectory of length {len}")]
    DownsampleFactor { factor: usize, len: usize },

    #[error("duplicate {kind} row: pair {first} and pair {second} coincide")]
    DuplicateRow {
        kind: &'static str,
        first: usize,
        second: usize,
    },

    #[error("empty pair set")]
    EmptyPairs,

    #[error(
        "kernel matrix of size {size} is not numerically positive definite \
         (jitter {jitter:e}); increase the jitter{hint}"
    )]
    NotPositiveDefinite {
        size: usize,
        jitter: f64,
        hint: &'static str,
    },

    #[error("GP-SSM output dimension {dim}: {source}")]
    Dimension {
        dim: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("model and Lyapunov function were trained on different pairs ({nominal} vs {clf})")]
    ProvenanceMismatch { nominal: String, clf: String },

    #[error("stabilizing control infeasible at x = {x:?} (constraint value {value:e})")]
    InfeasibleControl { x: Vec<f64>, value: f64 },

    #[error("non-finite state {0:?}")]
    NonFinite(Vec<f64>),

    #[error("simulation step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}
