use thiserror::Error;

/// Errors raised by the estimator, the trajectory generators and the file readers.
#[derive(Debug, Error)]
pub enum IocError {
    /// The state Jacobian of the dynamics is singular (or numerically so) at time `k`.
    #[error("state Jacobian of the dynamics is not invertible at k = {k} (reciprocal condition {rcond:.3e})")]
    AssumptionViolated { k: usize, rcond: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// An error raised while processing trajectory step `index`.
    #[error("at step {index}: {source}")]
    AtStep {
        index: usize,
        #[source]
        source: Box<IocError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IocError {
    pub(crate) fn dims(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        IocError::DimensionMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn at_step(self, index: usize) -> Self {
        match self {
            e @ IocError::AtStep { .. } => e,
            e => IocError::AtStep {
                index,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = IocError> = std::result::Result<T, E>;
