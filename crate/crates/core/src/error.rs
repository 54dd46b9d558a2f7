use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum ZoError {
    /// A numeric parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input data violates a precondition (empty dataset, non-positive times, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// Input parses but its content does not match the expected schema.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A component oracle returned a non-finite value.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// The requested operation needs something the problem does not provide.
    #[error("missing capability: {0}")]
    Capability(String),

    #[error("divergence at iteration {iter} after {oracle_calls} oracle calls: {message}")]
    Divergence {
        iter: u64,
        oracle_calls: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, ZoError>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ZoError::Parameter(msg.into()))
}
