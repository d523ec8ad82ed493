use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("orbit error: {0}")]
    Orbit(String),
    #[error("no consistent inverse branch: {0}")]
    Branch(String),
    #[error("radius error: |u| = {norm:e} exceeds {limit:e}")]
    Radius { norm: f64, limit: f64 },
    #[error("pinch violation: {0}")]
    PinchViolation(String),
    #[error("bracket error: {0}")]
    Bracket(String),
    #[error("holonomy residual {residual:e} exceeds tolerance {tol:e}")]
    Holonomy { residual: f64, tol: f64 },
    #[error("domination error: {0}")]
    Domination(String),
    #[error("no domination: beta1 = {beta1} >= alpha2 = {alpha2}")]
    NoDomination { beta1: f64, alpha2: f64 },
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
