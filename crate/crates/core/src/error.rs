use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("alignment error: field has {field} samples, grid has {grid}")]
    Alignment { field: usize, grid: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("Volterra iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    Iteration { iterations: usize, residual: f64 },

    #[error("degenerate transmission: |1/T| = {inv_t_abs:e} at k = {k}")]
    Degenerate { k: f64, inv_t_abs: f64 },

    #[error("tolerance error: {0}")]
    Tolerance(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("overflow: non-finite samples at t = {t}")]
    Overflow { t: f64 },

    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    #[error("convention error: {0}")]
    Convention(String),

    #[error("horizon error: {0}")]
    Horizon(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
