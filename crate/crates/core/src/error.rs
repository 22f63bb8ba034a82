use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the solver, its I/O layer and the measurement harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite population")]
    NonFinitePopulation,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unstable parameters: nu = {nu} gives omega = {omega}, outside (0, 2)")]
    UnstableParameters { nu: f64, omega: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("pre- and post-collision fields share storage")]
    Aliasing,

    #[error("divergence at step {step}")]
    Divergence { step: u64 },

    #[error("value {value} overflows {target} storage")]
    Overflow { value: f64, target: &'static str },

    #[error("no shedding detected ({crossings} zero crossings)")]
    NoShedding { crossings: usize },

    #[error("invalid measurement: {0}")]
    Measurement(String),

    #[error("corrupt checkpoint at byte offset {offset}: {reason}")]
    CorruptCheckpoint { offset: u64, reason: String },

    #[error("checkpoint version mismatch: file has {found}, expected {expected}")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("checkpoint shape mismatch: {0}")]
    CheckpointShape(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numerics rather than by the setup.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinitePopulation | Error::Divergence { .. } | Error::Overflow { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
