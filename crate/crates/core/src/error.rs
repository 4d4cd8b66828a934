use std::path::PathBuf;

use thiserror::Error;

use crate::connectome::Domain;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("matrix is not square: {rows} rows, row {row} has {cols} columns")]
    NonSquare { rows: usize, row: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("asymmetry {max_diff:e} at ({row}, {col}) exceeds tolerance {tol:e}")]
    Asymmetric {
        row: usize,
        col: usize,
        max_diff: f64,
        tol: f64,
    },

    #[error("expected {expected} nodes, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{domain} entry {value} at ({row}, {col}) is outside the valid range")]
    OutOfRange {
        domain: Domain,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("expected a {expected} connectome, got {found}")]
    DomainMismatch { expected: Domain, found: Domain },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("non-finite {term} loss at epoch {epoch}, step {step}")]
    NonFiniteLoss {
        term: &'static str,
        epoch: usize,
        step: usize,
    },

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad inputs or configuration rather than by the run itself.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::NonFiniteLoss { .. })
    }
}
