use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("density matrix invariant violated: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid bath parameters: {0}")]
    InvalidBath(String),

    #[error("coupling angle {0} rad is not one of pi, pi/2, pi/4")]
    InvalidAngle(f64),

    #[error("action index {0} is outside the 27-element action set")]
    InvalidAction(usize),

    #[error("invalid control interval: {0}")]
    InvalidInterval(String),

    #[error("integration diverged at t = {time:.6}: entry magnitude {magnitude:.3e} exceeds 1e6")]
    Divergence { time: f64, magnitude: f64 },

    #[error("fidelity undefined: determinant product {0:.3e} is negative beyond tolerance")]
    NegativeDeterminant(f64),

    #[error("POVM distribution reconstructs to trace {0}, expected 1")]
    CorruptDistribution(f64),

    #[error("invalid task set: {0}")]
    InvalidTaskSet(String),

    #[error("invalid environment grid: {0}")]
    InvalidGrid(String),

    #[error("network shape error: {0}")]
    Shape(String),

    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    #[error("checkpoint schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("checkpoint case {checkpoint} does not match requested case {requested}")]
    CaseMismatch { checkpoint: u8, requested: u8 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
