use thiserror::Error;

/// Errors raised by the numerics in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown flux `{0}` (expected burgers, lwr or cubic)")]
    UnknownFlux(String),
    #[error("flux polynomial must satisfy f(0) = 0, got constant term {0}")]
    NonzeroFluxConstant(f64),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid velocity split: {0}")]
    InvalidSplit(String),
    #[error("time step {dt} violates the CFL bound {max_dt}")]
    CflViolation { dt: f64, max_dt: f64 },
    #[error("non-finite value at t = {time}, cell {cell}")]
    NonFinite { time: f64, cell: usize },
    #[error("flux is neither convex nor concave on the admissible range; use the Godunov reference")]
    NotConvex,
    #[error("evaluation time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("x = 0 is not an interface of the grid")]
    OriginNotOnGrid,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("test function support [{lo}, {hi}] escapes the admissible region [{min}, {max}]")]
    SupportEscape { lo: f64, hi: f64, min: f64, max: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
