//! Mutual information between paired embedding matrices.

mod digamma;
mod embm;
mod estimator;
mod validation;

use std::path::Path;

pub use digamma::digamma;
pub use embm::{validate_file, EmbeddingMatrix, EmbeddingMeta, EmbmHeader, FORMAT_VERSION, MAGIC};
pub use estimator::{
    chebyshev, estimate_mi, joint_radius, marginal_count, mi_from_stats, neighbor_stats, Jitter, MiEstimate,
    MiOptions, NeighborStats, DEFAULT_JITTER, DEFAULT_K,
};
pub use validation::{default_tolerance, gaussian_mi, gaussian_pairs, validate_gaussian, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum MiError {
    #[error("digamma is defined here only for finite x > 0, got {0}")]
    DigammaDomain(f64),
    #[error("{rows} x {cols} matrix cannot hold {len} values")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("paired matrices have {a} and {b} rows")]
    RowMismatch { a: usize, b: usize },
    #[error("paired matrices have {a} and {b} columns")]
    DimMismatch { a: usize, b: usize },
    #[error("neighbor count k must be at least 1, got {0}")]
    InvalidK(usize),
    #[error("need at least k + 1 = {} samples, got {m}", k + 1)]
    TooFewSamples { m: usize, k: usize },
    #[error("joint radius of row {row} is zero (duplicate samples)")]
    Degenerate { row: usize },
    #[error("duplicate joint samples make the estimate degenerate; enable jitter (e.g. --jitter 1e-10)")]
    Duplicates,
    #[error("jitter magnitude must be positive and finite, got {0}")]
    InvalidJitter(f64),
    #[error("invalid validation parameters: {0}")]
    InvalidParameters(String),
    #[error("embm format: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl MiError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    /// Failures of the estimate itself, as opposed to bad input or I/O.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, MiError::Degenerate { .. } | MiError::Duplicates)
    }
}
