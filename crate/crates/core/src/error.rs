use thiserror::Error;

/// Errors raised by the inference toolkit.
#[derive(Debug, Error)]
pub enum IsingError {
    #[error("dimension mismatch: expected {expected} spins, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for {n_spins} spins")]
    IndexOutOfRange { index: usize, n_spins: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backtracking did not converge: Lipschitz constant reached {lipschitz:e}")]
    NonConvergence { lipschitz: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IsingError>;

pub(crate) fn invalid(msg: impl Into<String>) -> IsingError {
    IsingError::InvalidArgument(msg.into())
}
