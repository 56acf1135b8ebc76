use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible frequency vector: {0}")]
    InfeasibleFrequencies(String),

    #[error("singular basis: {0}")]
    SingularBasis(String),

    #[error("simplex iteration limit of {0} reached")]
    IterationLimit(usize),

    #[error("{count} deterministic policies exceed the limit of {limit}; pass force to override")]
    TooManyPolicies { count: u128, limit: u128 },

    #[error("efficiency test inconsistency: {0}")]
    EfficiencyInconsistency(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
