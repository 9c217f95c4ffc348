//! Crate-wide error type.
//!
//! The variants are deliberately coarse: they map 1:1 onto the CLI exit
//! codes (parse/structure → 2, assumption → 3, numerical → 4, budget → 5),
//! so every library failure surfaces as a stable, scriptable status.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed files or structurally invalid data (bad JSON, missing noise
    /// fields, ragged tables).
    #[error("parse error: {0}")]
    Parse(String),

    /// Shape mismatches: non-square matrices, wrong vector lengths.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Arguments outside an operation's domain (α ≤ 0, odd n, k ≤ 0, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A model assumption failed: Ā not positive stable, weights not a
    /// distribution, stationarity mismatch, mixing-time certificate failure.
    #[error("assumption violated: {0}")]
    Assumption(String),

    /// A solve or invariant check failed numerically past tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The configured simulation budget would be exceeded.
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// Inconsistent run configuration (too few batches, bad grids, ...).
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
