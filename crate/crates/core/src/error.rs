use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("numerical failure at iteration {k}: {what}")]
    Numerical { k: usize, what: String },

    #[error("degenerate interval for c: mu_f + mu_F = 0; use the convex-case certificate instead")]
    DegenerateInterval,

    #[error("reference solve failed after {iterations} iterations (best residual {best_residual:e})")]
    ReferenceFailure {
        iterations: usize,
        best_residual: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error in {context} at byte offset {offset}: {msg}")]
    ParseAtOffset {
        context: &'static str,
        offset: usize,
        msg: String,
    },

    #[error("parse error in {context} at line {line}: {msg}")]
    ParseAtLine {
        context: &'static str,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
