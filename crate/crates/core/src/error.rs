use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the FDF pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    /// The spiral could not supply enough distinct grid cells.
    #[error("filter generation failed at level {level}: {reason}")]
    Generation { level: usize, reason: String },

    #[error("filter spec, line {line}: {reason}")]
    FilterSpecParse { line: usize, reason: String },

    #[error("invalid filter spec: {0}")]
    InvalidFilter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("data format: {0}")]
    DataFormat(String),

    #[error("model bank: {0}")]
    Bank(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
