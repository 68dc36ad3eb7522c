use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("curves live on incompatible grids")]
    IncompatibleGrids,

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("no closed form available: {0}")]
    UnsupportedClosedForm(String),

    #[error("insufficient replicates: need at least {min}, got {got}")]
    InsufficientReplicates { min: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
