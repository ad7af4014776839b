use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: String,
    },
    #[error("singular evaluation: {0}")]
    Singular(String),
    #[error("Paley-Wiener condition violated: ||rho||_1 = {l1} >= 1")]
    PaleyWiener { l1: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    ConfigErrors(Vec<String>),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, value: f64, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        value,
        reason: reason.into(),
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(invalid(name, value, "must be finite"))
    }
}
