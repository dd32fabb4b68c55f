//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HomogError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("symbol is rank deficient: alpha0 = {alpha0:.3e}")]
    RankDeficient { alpha0: f64 },

    #[error("coefficient field invalid: {0}")]
    BadCoefficient(String),

    #[error("solver did not converge after {iters} iterations (relative residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("invalid angle phi = {0}: arg zeta must lie in (0, 2pi)")]
    InvalidAngle(f64),

    #[error("invalid time t = {0}: contour path requires t > 0")]
    InvalidTime(f64),

    #[error("effective symbol not positive definite at k = {k:?} (eigenvalue {eig:.3e})")]
    NotPositive { k: Vec<i64>, eig: f64 },

    #[error("resolvent block numerically singular at k = {k:?}")]
    SingularBlock { k: Vec<i64> },

    #[error("adjoint mismatch: |<Tf,h> - <f,T*h>| = {gap:.3e} exceeds {tol:.1e}")]
    AdjointMismatch { gap: f64, tol: f64 },

    #[error("contour node {node} failed: {source}")]
    ContourNode {
        node: usize,
        #[source]
        source: Box<HomogError>,
    },

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("insufficient points for fit: need {need}, got {got}")]
    InsufficientPoints { need: usize, got: usize },

    #[error("missing metrics in records: {0}")]
    MissingMetrics(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HomogError>;
