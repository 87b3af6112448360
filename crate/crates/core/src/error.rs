use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid ansatz: {0}")]
    InvalidAnsatz(String),

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The selected projectors carry no probability mass, so the
    /// renormalized action-projector policy is undefined.
    #[error("action-projector policy has zero total mass")]
    ZeroProjectorMass,

    /// Log-policy gradient requested for an action with zero probability and
    /// no clip floor configured.
    #[error("action {action} has zero probability and no clip floor is set")]
    ZeroProbability { action: usize },

    #[error("state is not a product state (factorization error {0:.3e})")]
    NotProductState(f64),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
