use thiserror::Error;

use crate::bcd::SolverTrace;

/// Errors raised by the solvers, losses and experiment harness.
#[derive(Debug, Error)]
pub enum TrimError {
    /// An argument violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A precision-matrix iterate failed the Cholesky check.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// The objective became non-finite. The trace up to that point is kept.
    #[error("solver diverged at iteration {iteration}: {reason}")]
    Divergence {
        iteration: usize,
        reason: String,
        trace: Box<SolverTrace>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl TrimError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        TrimError::Domain(msg.into())
    }

    /// True for errors caused by numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            TrimError::NotPositiveDefinite | TrimError::Divergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, TrimError>;
