use thiserror::Error;

/// Errors raised anywhere in the strip pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry: Jacobian f = {value:e} <= 0 at node (s-index {s_index}, t-index {t_index}); strip is not a local diffeomorphism at this width")]
    NonPositiveJacobian {
        s_index: usize,
        t_index: usize,
        value: f64,
    },

    #[error("geometry: cannot evaluate {what} at {at}")]
    EvaluationFailure { what: &'static str, at: String },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigen: factorization failed at pivot {pivot} (value {value:e}); the shifted matrix is not positive definite")]
    FactorizationFailure { pivot: usize, value: f64 },

    #[error("eigen: no convergence after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigen: degenerate alignment, |<v, ref>_M| = {overlap:e} < 1e-8")]
    DegenerateAlignment { overlap: f64 },

    #[error("analysis: eigenfunction range max - min = {range:e} is degenerate (constant mode?)")]
    DegenerateRange { range: f64 },

    #[error("config: {field}: {message}")]
    Config { field: String, message: String },

    #[error("config: parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
