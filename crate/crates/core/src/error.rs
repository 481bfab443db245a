use thiserror::Error;

use crate::netparams::ParamKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter conversion needed the inverse of a numerically singular matrix.
    #[error("singular conversion: {what} has reciprocal condition number {rcond:.3e}")]
    SingularConversion { what: &'static str, rcond: f64 },

    /// The coupled port equations have no unique solution (resonant or ill-posed terminations).
    #[error("singular system: {what} has reciprocal condition number {rcond:.3e}")]
    SingularSystem { what: &'static str, rcond: f64 },

    #[error("expected {expected:?}-parameters, got {found:?}")]
    KindMismatch { expected: ParamKind, found: ParamKind },

    #[error("matrix is not block lower triangular: upper block norm {norm:.3e}")]
    NotBlockLowerTriangular { norm: f64 },

    #[error("network is not unilateral: {block} block norm {norm:.3e}")]
    NotUnilateral { block: &'static str, norm: f64 },

    #[error("matrix is not symmetric: max asymmetry {asymmetry:.3e}")]
    NotSymmetric { asymmetry: f64 },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),

    /// More solver runs than allowed stopped on their iteration budget.
    #[error("{count} of {total} runs did not converge (allowed fraction {limit})")]
    NonConvergence { count: usize, total: usize, limit: f64 },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
