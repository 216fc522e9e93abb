use thiserror::Error;

/// Errors produced by lattice construction, the engines, and the predictors.
#[derive(Debug, Error)]
pub enum SimError {
    /// A parameter is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two neighboring cells drew bit-identical arrival times. The general
    /// engines cannot order such updates; the run is aborted.
    #[error("arrival-time tie between neighboring cells {cell_a} and {cell_b} at t={time}")]
    TieFault { time: f64, cell_a: u32, cell_b: u32 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Shorthand for an [`SimError::InvalidArgument`] result.
pub fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(SimError::InvalidArgument(msg.into()))
}
