use std::path::PathBuf;

use thiserror::Error;

use crate::frameset::DistanceMatrix;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot ingest {path}: {message}")]
    Ingest { path: PathBuf, message: String },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical error at epoch {epoch}: {message}")]
    Numerical { epoch: usize, message: String },

    #[error("fit error: {0}")]
    Fit(String),

    /// Pruning would leave too few frames; the untouched input is handed back.
    #[error("prune error: {message}")]
    Prune {
        message: String,
        original: Box<DistanceMatrix>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    /// Stable, machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Ingest { .. } => "ingest",
            Error::Format { .. } => "format",
            Error::Validation(_) => "validation",
            Error::Contract(_) => "contract",
            Error::Numerical { .. } => "numerical",
            Error::Fit(_) => "fit",
            Error::Prune { .. } => "prune",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Image(_) => "image",
            Error::Csv(_) => "csv",
        }
    }
}
