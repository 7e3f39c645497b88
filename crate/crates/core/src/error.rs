use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("non-ergodic chain: {0}")]
    NonErgodic(String),
    #[error("too large: {0}")]
    TooLarge(String),
    #[error("class count {count} exceeds cap {cap}")]
    ClassCap { count: u128, cap: u128 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid codeword: {0}")]
    InvalidCodeword(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
