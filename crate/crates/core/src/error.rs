use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid norm: {0}")]
    InvalidNorm(String),
    #[error("gradient of the norm is undefined at the zero vector")]
    ZeroVector,
    #[error("radius must be positive, got {0}")]
    NonpositiveRadius(f64),
    #[error("time must be positive, got {0}")]
    NonpositiveTime(f64),
    #[error("grid spacing must be positive, got {0}")]
    NonpositiveSpacing(f64),
    #[error("bounding box half-width {l} too small for ball extent {extent} plus two cells")]
    BadPadding { l: f64, extent: f64 },
    #[error("box width 2L = {width} is not an integer multiple of h = {h}")]
    SpacingMismatch { width: f64, h: f64 },
    #[error("exponent q = {q} outside the {regime} regime")]
    OutOfRegime { q: f64, regime: &'static str },
    #[error("field has {got} values, grid has {expected} nodes")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("Newton failed after {iterations} iterations, residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("explicit Euler produced a non-finite value at t = {0}")]
    StepTooLarge(f64),
    #[error("test bump reaches the boundary of the computational ball")]
    BumpTouchesBoundary,
    #[error("no blow-up detected for any amplitude")]
    AllCensored,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
