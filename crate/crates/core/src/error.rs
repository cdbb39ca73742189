use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} lies outside the pulse window [0, {t_p}]")]
    TimeOutOfRange { t: f64, t_p: f64 },

    #[error("invalid parameters: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("no trajectories contributed to sample {sample}")]
    EmptyEnsemble { sample: usize },

    #[error("accumulators are incompatible: {0}")]
    Mismatch(String),

    #[error("all {0} trajectories diverged")]
    AllDiverged(usize),

    #[error("non-finite amplitude at step {step} in a deterministic integration")]
    NonFinite { step: usize },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed table {}: {message}", .path.display())]
    Table { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
