use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An input vector does not match the expected dimension.
    #[error("input dimension mismatch: expected {expected}, got {got}")]
    InputDimension { expected: usize, got: usize },

    /// A caller violated an operation's contract (empty series, wrong units,
    /// missing column, inconsistent shapes, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid model or configuration parameters.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A gradient became non-finite during optimization.
    #[error("training diverged: non-finite gradient at parameter index {index}")]
    NonFiniteGradient { index: usize },

    /// The training loss became non-finite.
    #[error("training diverged at epoch {epoch}: {detail}")]
    TrainingDiverged { epoch: usize, detail: String },

    /// The integrator produced a non-finite state.
    #[error("integration diverged at step {step}")]
    IntegrationDiverged { step: usize },

    /// A CSV row failed to parse.
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
