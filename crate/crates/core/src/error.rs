use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("instance too large: {0}")]
    Size(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("dimension mismatch: {0}")]
    Dim(String),

    #[error("invalid solution: {0}")]
    InvalidSolution(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
