use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfilerError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("signature file, line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Core(#[from] camolab_core::Error),

    #[error(transparent)]
    Attack(#[from] camolab_attack::AttackError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ProfilerError>;
