//! Crate-wide error type.

/// Errors surfaced by the library. The CLI maps these onto its exit-code
/// contract: configuration and parse problems exit 2, a run that never blows
/// up exits 3, numerical failures exit 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("quadrature: {0}")]
    Quadrature(String),
    #[error("fit: {0}")]
    Fit(String),
    #[error("similarity transform: {0}")]
    Transform(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("no blow-up detected: {0}")]
    NoBlowup(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
