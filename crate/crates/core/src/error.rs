use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {x} lies outside the open support ({lo}, {hi})")]
    OutsideSupport { x: f64, lo: f64, hi: f64 },

    #[error("{0} does not satisfy the assumptions of the Fisher-information bound")]
    UnsupportedForBounds(String),

    #[error("truncation interval ({lo}, {hi}) carries no probability mass")]
    EmptyMass { lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("support is unbounded; truncate the distribution before solving the spectrum")]
    UnboundedSupport,

    #[error("mass matrix is singular: density vanishes numerically on cell {cell}")]
    SingularMass { cell: usize },

    #[error("no closed-form spectrum for {0}")]
    NoClosedForm(String),

    #[error("basis evaluation out of range: {0}")]
    OutOfRange(String),

    #[error("spectral gap is not positive (lambda_1 = {0})")]
    DegenerateSpectrum(f64),

    #[error("the estimator needs model gradients but the sample has none")]
    MissingGradients,

    #[error("multi-index {0} does not activate variable {1}")]
    InactiveIndex(String, usize),

    #[error("multi-indices do not share the requested activity pattern: {0}")]
    MixedPattern(String),

    #[error("monomial bound requires a uniform law on [0, 1] for variable {0}")]
    NotUniform01(usize),

    #[error("tensor quadrature supports at most {max} inputs, got {got}")]
    DimensionTooLarge { got: usize, max: usize },

    #[error("no analytic indices are known for model {0}")]
    NoAnalyticForm(String),

    #[error("invalid physical parameters: {0}")]
    InvalidPhysicalParams(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("the estimator needs the model function, not only a sample")]
    MissingModel,

    #[error("malformed sample file: {0}")]
    MalformedSample(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
