use thiserror::Error;

/// Errors produced by model construction and the solvers.
#[derive(Debug, Clone, Error)]
pub enum ChillerError {
    /// A model builder rejected its parameters.
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    /// A bath specification is out of range.
    #[error("invalid bath specification: {0}")]
    InvalidBath(String),

    /// The Liouvillian kernel is not one-dimensional; thermodynamic
    /// observables are not emitted for a non-unique steady state.
    #[error("steady state is not unique: null space dimension {null_dim}")]
    DegenerateSteadyState { null_dim: usize },

    /// The linear solve or the positivity repair failed.
    #[error("steady-state solver failure: {0}")]
    SolverFailure(String),

    /// An operation was asked of a model it does not support.
    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, ChillerError>;
