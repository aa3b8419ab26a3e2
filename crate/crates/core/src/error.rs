use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("topology mismatch between chart points")]
    TopologyMismatch,

    #[error("metric is degenerate (smallest eigenvalue {min_eigenvalue:e}) and no analytic Christoffel symbols were supplied")]
    DegenerateMetric { min_eigenvalue: f64 },

    #[error("degenerate constraint distribution: {0}")]
    DegenerateConstraint(String),

    #[error("velocity violates the constraint distribution (residual {residual:e})")]
    ConstraintViolation { residual: f64 },

    #[error("state left the finite range at t = {time}")]
    NonFinite { time: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty sampling region")]
    EmptyRegion,

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = GeoError> = std::result::Result<T, E>;
