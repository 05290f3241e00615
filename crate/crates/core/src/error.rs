use thiserror::Error;

/// Errors raised by the optimizer stack.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-facing configuration (unknown names, bad sizes, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Cholesky factorization kept failing after the whole jitter ladder.
    #[error("model fit failed: kernel matrix not positive definite (last jitter {jitter:e})")]
    ModelFit { jitter: f64 },

    /// Joint posterior sampling could not factor the posterior covariance.
    #[error("posterior sampling failed: covariance not factorizable (last jitter {jitter:e})")]
    Sampling { jitter: f64 },

    /// Input that makes a computation meaningless (all-equal values, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The objective returned a non-finite value or raised.
    #[error("objective evaluation failed at eval {eval_index}: {message}")]
    Evaluation { eval_index: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
