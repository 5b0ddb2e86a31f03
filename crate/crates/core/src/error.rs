use thiserror::Error;

/// Errors raised by the core types, metrics and learners.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid feature schema: {0}")]
    Schema(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("empty evaluation: {0}")]
    EmptyEvaluation(&'static str),

    #[error("cannot stratify: {0}")]
    Stratification(String),

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("model serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
