use thiserror::Error;

/// Errors reported by the beam-alignment toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The request would require enumerating an infeasibly large set.
    #[error("capacity refused: {0}")]
    CapacityRefused(String),

    /// An iterative solver failed to converge.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// The scenario's frame timing or configuration cannot be satisfied.
    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
