use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("unsupported kernel mode: {0}")]
    UnsupportedMode(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("skeleton buffer exhausted: {0}")]
    BufferExhausted(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("table validation error: {0}")]
    Table(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(format!($($arg)*)))
    };
}
pub(crate) use bail;
