use thiserror::Error;

/// Errors raised by the library. Diagnostic operations (criticality checks,
/// cone geometry, chart residuals) report failures in their return values
/// instead.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("trajectory left the bounding box at t = {t}")]
    BoxEscape { t: f64 },

    #[error("unsupported jet order {0} (supported: 2..=4)")]
    UnsupportedOrder(usize),

    #[error("quadrature did not converge: {0}")]
    NoConvergence(String),

    #[error("jet order mismatch: expected {expected}, got {got}")]
    OrderMismatch { expected: usize, got: usize },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("quadratic form is definite: the cone is empty")]
    EmptyCone,

    #[error("method `product` needs a block-uniform diagonal form")]
    NotBlockUniform,

    #[error("degenerate quadratic form: eigenvalue {0:e} below tolerance")]
    Degenerate(f64),

    #[error("divergent estimate: {0}")]
    Divergent(String),

    #[error("insufficient derivative order: need {need}, have {have}")]
    DerivativeOrder { need: usize, have: usize },

    #[error("wrong branch: {0}")]
    Branch(String),

    #[error("chart precondition violated: {0}")]
    ChartPrecondition(String),

    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
