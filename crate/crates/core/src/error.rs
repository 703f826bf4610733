use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped by [`ErrorKind`] so that front ends can map them onto
/// distinct exit codes without matching every case.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("subject {id}: expected {expected_rows}x{expected_cols} series, found {rows}x{cols}")]
    ShapeMismatch {
        id: String,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("subject {id}: non-finite value at ROI {roi}, time point {t}")]
    NonFinite { id: String, roi: usize, t: usize },
    #[error("subject {id}: label {label} is not 0 or 1")]
    InvalidLabel { id: String, label: i64 },
    #[error("duplicate subject id {0}")]
    DuplicateId(String),
    #[error("ROI {roi} has zero variance")]
    ZeroVariance { roi: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("spectral features were produced by a different basis")]
    BasisMismatch,
    #[error("non-finite value in {0}")]
    NumericFailure(String),
    #[error("labeled subset contains a single class")]
    SingleClass,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => ErrorKind::Usage,
            Error::NotSymmetric { .. }
            | Error::NoConvergence { .. }
            | Error::NumericFailure(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
