use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the learning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time grid is not uniform (step {index} differs from the first step)")]
    NonUniformGrid { index: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("non-finite input in {0}")]
    NonFinite(&'static str),

    #[error("solution diverged: |C| = {value:.3e} exceeds bound {bound} at t = {t:.6}")]
    Divergence { t: f64, value: f64, bound: f64 },

    #[error("integrator step size underflow at t = {t:.6} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("no lambda on the grid keeps every split's coefficients within {threshold}")]
    ThresholdUnsatisfiable { threshold: f64 },

    #[error("no generalizable structure: majority structure is held by {count} model(s)")]
    NoGeneralizableStructure { count: usize },

    #[error("model produces divergent solutions over the whole search interval [{lo}, {hi}]")]
    ModelInvalidOverBounds { lo: f64, hi: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("artifacts differ between runs: {}", .0.join(", "))]
    Mismatch(Vec<String>),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input or configuration rather than by
    /// a computation going wrong.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Precondition(_) | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
