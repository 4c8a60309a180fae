use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("potential is not integrable: {0}")]
    NotIntegrable(String),

    #[error("bracket norm diverges: {0}")]
    Divergent(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid localization: {0}")]
    InvalidLocalization(String),

    #[error("dense assembly of dimension {dimension} exceeds the cap of {cap}")]
    CapExceeded { dimension: usize, cap: usize },

    #[error("matrix is not Hermitian: defect {defect:e} exceeds {tolerance:e}")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("eigensolver failed: {0}")]
    Solver(String),

    #[error("iterative count inconclusive after {iterations} iterations (best certificate {certificate:e})")]
    Inconclusive { iterations: usize, certificate: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
