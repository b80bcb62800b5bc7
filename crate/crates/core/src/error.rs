use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("frequency outside the null shell: {0}")]
    OutsideShell(String),
    #[error("degenerate direction: {0}")]
    Degenerate(String),
    #[error("empty field: {0}")]
    EmptyField(String),
    #[error("unsupported field: {0}")]
    Unsupported(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
