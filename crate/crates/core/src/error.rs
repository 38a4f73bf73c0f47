use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("singular marching step at node {index}: |1 - w*K(tau,tau)| = {denominator:e}")]
    SingularStep { index: usize, denominator: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("xi-window violation: evaluation point {point} outside [-{xi_max}, {xi_max}] at tau = {tau}")]
    WindowViolation { point: f64, xi_max: f64, tau: f64 },

    #[error("blow-up detected at tau = {tau}: {detail}")]
    BlowUp { tau: f64, detail: String },

    #[error("step-size control failed at x = {x}: step {step:e} after {attempts} attempts")]
    StepControl { x: f64, step: f64, attempts: usize },

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
