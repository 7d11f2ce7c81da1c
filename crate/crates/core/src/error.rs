use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum CamlError {
    /// A caller-supplied argument or configuration value is out of range.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown kind `{0}`")]
    UnknownKind(String),

    /// A file could not be parsed.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The weight graph splits into several connected components.
    #[error("graph is disconnected ({components} connected components)")]
    Disconnected { components: usize },

    /// Vertex with zero total weight; the degree matrix is singular.
    #[error("vertex {index} is isolated (zero degree)")]
    IsolatedVertex { index: usize },

    /// Local patch whose centered neighbors do not span `d` dimensions,
    /// or whose quadratic design matrix is rank deficient.
    #[error("degenerate patch at point {index}: {reason}")]
    DegeneratePatch { index: usize, reason: String },

    /// A linear solve or eigendecomposition failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Error raised inside a sweep cell, tagged with the cell coordinates.
    #[error("{algorithm} K={k} seed={seed}: {source}")]
    InCell {
        algorithm: String,
        k: usize,
        seed: u64,
        #[source]
        source: Box<CamlError>,
    },
}

impl CamlError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CamlError::InvalidInput(msg.into())
    }

    /// The innermost error, unwrapping sweep-cell annotations.
    pub fn root(&self) -> &CamlError {
        match self {
            CamlError::InCell { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, CamlError>;
