use thiserror::Error;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Core(#[from] camolab_core::Error),

    #[error("validation error: {0}")]
    Validation(String),

    /// A caller broke an ordering contract, such as training a generator
    /// against a substitute that is still being trained.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, AttackError>;
