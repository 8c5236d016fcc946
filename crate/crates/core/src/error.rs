use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("infinite divergence: symbol {symbol} has mass {mass} under p but none under q")]
    InfiniteDivergence { symbol: usize, mass: f64 },

    #[error("symbol {symbol} out of range 0..{d}")]
    SymbolOutOfRange { symbol: usize, d: usize },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("uncertainty set is infeasible: {0}")]
    Infeasible(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("test already stopped at n = {0}")]
    AlreadyStopped(u64),
}

pub type Result<T> = std::result::Result<T, Error>;
