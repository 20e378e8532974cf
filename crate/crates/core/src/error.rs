//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("normalization needs a batch of at least 2 samples, got {got}")]
    DegenerateBatch { got: usize },

    #[error("latent transform not invertible: |alpha[{index}]| = {value:e} is below 1e-12")]
    NonInvertible { index: usize, value: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("training diverged at iteration {iteration} (last lr = {lr}): {reason}")]
    Training {
        iteration: u64,
        lr: f64,
        reason: String,
    },

    #[error("sampling statistics have not been fitted; train the model first")]
    UnfittedStats,

    #[error("operation requires a {expected} model, got {got}")]
    WrongVariant { expected: &'static str, got: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("checkpoint format error at byte {offset}: {reason}")]
    Checkpoint { offset: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::Shape {
            context,
            expected: expected.into(),
            got: got.into(),
        }
    }
}
