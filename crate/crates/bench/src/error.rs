use thiserror::Error;

/// Errors split by the exit code they map to.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] specroute_core::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            _ => 3,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> BenchError {
        let context = context.into();
        move |source| BenchError::Io { context, source }
    }
}

pub type BenchResult<T> = std::result::Result<T, BenchError>;
