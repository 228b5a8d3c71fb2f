use thiserror::Error;

/// Errors surfaced by scoring, evaluation, and I/O operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Confidence ratio denominator (the second-largest logit) is exactly zero.
    #[error("confidence ratio collapsed: second-largest logit is zero")]
    DivisionByZero,

    /// A record carries both or neither of (true class, novel flag).
    #[error("invalid record: {0}")]
    InvalidRecord(String),

    /// One evaluation side is empty under the chosen positive definition.
    #[error("degenerate evaluation: no {side} samples under positive definition '{positive}'")]
    DegenerateEvaluation {
        side: &'static str,
        positive: &'static str,
    },

    /// File parse failure, with the 1-based line it occurred on.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// Fold parameters cannot produce valid disjoint train/test windows.
    #[error("invalid fold plan: {0}")]
    InvalidPlan(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
