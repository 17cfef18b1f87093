use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index:?} out of bounds for mode sizes {modes:?}")]
    IndexOutOfBounds { index: Vec<usize>, modes: Vec<usize> },

    #[error("point {0:?} lies outside the grid box")]
    OutsideGrid(Vec<f64>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("evaluator returned non-finite value {value} at index {index:?}")]
    NonFinite { index: Vec<usize>, value: f64 },

    #[error("underflow/ill-resolved kernel: {0}; enable the eta0 floor, enlarge the grid or increase T")]
    Underflow(String),

    #[error("density underflow at particle {0:?}")]
    DensityUnderflow(Vec<f64>),

    #[error("degenerate ensemble: covariance eigenvalue {0:e} below 1e-12")]
    DegenerateEnsemble(f64),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("recursion denominator is not positive ({0:e})")]
    NonPositiveDenominator(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown experiment id '{0}'")]
    UnknownExperiment(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
