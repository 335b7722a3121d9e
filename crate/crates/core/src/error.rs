use thiserror::Error;

/// Errors raised by the sampling, counting and diagnostic routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("margins are infeasible: {0}")]
    InfeasibleMargins(String),

    #[error("structural zero mask violates the one-per-row/column restriction: {0}")]
    MaskViolation(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The column chain has no path of positive weight from the empty
    /// partial sum to the pinned column total.
    #[error("no valid path through the column chain")]
    NoValidPath,

    /// Sampling reached a column with no valid completion. Only possible
    /// when a general (unrestricted) mask is enforced through pinning.
    #[error("sampling reached a dead end at column {column}")]
    DeadEnd { column: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("instance too large for brute-force enumeration ({cells} cells, limit {limit})")]
    SizeLimit { cells: usize, limit: usize },

    #[error("memo budget of {0} states exceeded")]
    BudgetExceeded(usize),

    #[error("margins are not of the required shape: {0}")]
    Shape(String),

    #[error("construction failed: {0}")]
    ConstructionFailed(String),

    #[error("matrix is outside the support of the proposal")]
    OutOfSupport,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
