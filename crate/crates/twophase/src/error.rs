use thiserror::Error;

/// Errors raised by the solvers and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("resolvent parameter must be nonzero")]
    ZeroLambda,
    #[error("shift not admissible: {0}")]
    InvalidDelta(String),
    #[error("point outside the admissible region: {0}")]
    OutOfRegion(String),
    #[error("root {name} has non-positive real part: {value}")]
    BranchDefect { name: &'static str, value: String },
    #[error("tangential frequency is zero; use the zero-mode formula")]
    ZeroMode,
    #[error("tangential frequency {0:e} below the supported minimum")]
    SmallFrequency(f64),
    #[error("determinant ratio {ratio:e} below floor {floor:e}")]
    IllConditioned { ratio: f64, floor: f64 },
    #[error("singular linear system (pivot ratio {0:e})")]
    Singular(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("evaluation point {0} outside the domain")]
    Domain(f64),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("differencing step underflow: {0}")]
    StepUnderflow(String),
    #[error("grid size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("smallness condition violated: {0}")]
    Smallness(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("signal not decayed at the end of the window: {0}")]
    Wraparound(String),
    #[error("data norm vanishes while the solution norm does not")]
    ZeroDataNorm,
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
