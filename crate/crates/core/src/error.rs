//! Error types used across the crate.

use crate::splitter::SplitSolution;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Curve construction rejected the input points.
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs violated an operation contract (shape or dimension mismatch).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A color constraint is not a partition of the interval indices or has
    /// an oversized block.
    #[error("color constraint error: {0}")]
    Constraint(String),

    /// The search budget ran out before any configuration met the tolerance.
    ///
    /// Carries the best configuration found. Non-convergence signals a
    /// numerical failure of the search, never nonexistence of a solution.
    #[error("solver did not converge: best max deviation {:.3e}", best.report.max_abs_deviation)]
    NonConvergence { best: Box<SplitSolution> },

    /// The instance exceeds the exhaustive-search budget.
    #[error("instance too large: {0}")]
    Resource(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}
