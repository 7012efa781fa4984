use thiserror::Error;

#[derive(Debug, Error)]
pub enum QbeError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error in `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("non-finite value at node {node} ({part})")]
    NonFinite { node: usize, part: &'static str },

    #[error("step size underflow: h+ = {h_plus:e} limited by node {node} (u = {u})")]
    StepUnderflow { h_plus: f64, node: usize, u: f64 },

    #[error("energy target {target} outside attainable range [{lo}, {hi}]")]
    FitRange { target: f64, lo: f64, hi: f64 },

    #[error("root finder failed: {0}")]
    Root(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, QbeError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(QbeError::Domain(msg.into()))
}

pub(crate) fn config_err(field: &str, msg: impl Into<String>) -> QbeError {
    QbeError::Config {
        field: field.to_string(),
        msg: msg.into(),
    }
}
