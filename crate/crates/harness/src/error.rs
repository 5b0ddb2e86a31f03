use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse { path: String, line: u64, column: usize, message: String },

    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] camolab_core::Error),

    #[error(transparent)]
    Attack(#[from] camolab_attack::AttackError),

    #[error(transparent)]
    Profiler(#[from] camolab_profiler::ProfilerError),
}

impl HarnessError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.display().to_string(), source }
    }

    pub fn stage(stage: &str, err: impl std::fmt::Display) -> Self {
        HarnessError::Stage { stage: stage.to_string(), message: err.to_string() }
    }

    /// Process exit code: 1 validation, 2 stage failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        use camolab_attack::AttackError;
        use camolab_core::Error as CoreError;
        use camolab_profiler::ProfilerError;
        match self {
            HarnessError::Validation(_) | HarnessError::Parse { .. } => 1,
            HarnessError::Stage { .. } => 2,
            HarnessError::Io { .. } => 3,
            HarnessError::Core(e) | HarnessError::Attack(AttackError::Core(e)) | HarnessError::Profiler(ProfilerError::Core(e)) => {
                match e {
                    CoreError::Schema(_) | CoreError::Validation(_) | CoreError::Serialization(_) => 1,
                    _ => 2,
                }
            }
            HarnessError::Attack(AttackError::Validation(_)) => 1,
            HarnessError::Attack(_) => 2,
            HarnessError::Profiler(ProfilerError::Io(_)) => 3,
            HarnessError::Profiler(ProfilerError::Validation(_) | ProfilerError::Parse { .. } | ProfilerError::Csv(_)) => 1,
            HarnessError::Profiler(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
