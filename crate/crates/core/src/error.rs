use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),

    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("accept rate is undefined: no draft tokens were generated")]
    NoDraftTokens,

    #[error("duplicate query id {0:?}")]
    DuplicateQuery(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: msg.into(),
    }
}
