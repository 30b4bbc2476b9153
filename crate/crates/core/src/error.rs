//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum QlError {
    #[error("grid error: {0}")]
    Grid(String),
    #[error("filter error: {0}")]
    Filter(String),
    #[error("lattice error: {0}")]
    Lattice(String),
    #[error("spectral error: {0}")]
    Spectral(String),
    #[error("quasi-adiabatic error: {0}")]
    Qac(String),
    #[error("experiment error: {0}")]
    Experiment(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("Hilbert dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("near-degenerate ground state (gap {gap:.3e} below tolerance {tol:.1e})")]
    DegenerateGroundState { gap: f64, tol: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QlError>;
