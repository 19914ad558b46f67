use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Shapes, partitions or spaces that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// Inputs that violate a documented invariant (non-unitary matrix, bad partition, ...).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// The closed-form boundary matrix has a vanishing denominator.
    #[error("singular parameterization: |denominator| = {0:e}")]
    SingularParameterization(f64),

    #[error("ill-conditioned loop: {0}")]
    IllConditionedLoop(String),

    #[error("parity error: {0}")]
    Parity(String),
}

impl Error {
    /// True for failures caused by floating point conditioning rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::SingularParameterization(_) | Error::IllConditionedLoop(_)
        )
    }
}
