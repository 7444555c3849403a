//! Crate-wide error type.

use crate::solver::IterationRecord;

/// Errors produced by grid construction, operators, the solver, and the
/// experiment runner.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Vector or operator sizes do not agree.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A parameter violates its documented constraint.
    #[error("invalid {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// A NaN or infinity was encountered where finite values are required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The outer iteration blew up; the partial history is retained so the
    /// caller can still write diagnostics.
    #[error("solver diverged at outer iteration {iteration}: {detail}")]
    Diverged {
        iteration: usize,
        detail: String,
        history: Vec<IterationRecord>,
    },

    /// Experiment configuration failed validation; every violation is listed.
    #[error("invalid configuration:\n{}", format_issues(.0))]
    InvalidConfig(Vec<ConfigIssue>),

    /// One or more experiment variants failed to solve.
    #[error("experiment failed: {0}")]
    ExperimentFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single configuration violation, tied to the field that caused it.
#[derive(Debug, Clone)]
pub struct ConfigIssue {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
