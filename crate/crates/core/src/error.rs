use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("control field type mismatch: preset `{preset}` responds to {expected} fields, got {got}")]
    FieldTypeMismatch {
        preset: String,
        expected: &'static str,
        got: &'static str,
    },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("position {0} is outside the sampled profile span")]
    OutsideProfile(f64),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("integrator stability violated: {0}")]
    Stability(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
