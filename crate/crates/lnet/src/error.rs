//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the tensor engine, model, data pipeline and trainer.
#[derive(Debug, Error)]
pub enum Error {
    /// A tensor dimension did not match what the operation requires.
    /// `detail` names the offending dimension and the expected/actual sizes.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// An argument was outside the operation's domain (τ ≤ 0, odd channel
    /// count for MFM, β outside [0,1), ...).
    #[error("invalid argument to {op}: {detail}")]
    Invalid { op: &'static str, detail: String },

    /// A model or run configuration failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A dataset file could not be parsed.
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    /// A raw label string has no class mapping.
    #[error("unknown label {label:?} at {path}:{line}")]
    UnknownLabel { label: String, path: String, line: usize },

    /// A serialized model or archive file is malformed.
    #[error("bad file format: {0}")]
    Format(String),

    /// A non-finite value appeared where the contract requires finite data.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// The training loop aborted.
    #[error("training aborted at iteration {iteration}: {detail}")]
    Training { iteration: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    pub(crate) fn invalid(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Invalid { op, detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
