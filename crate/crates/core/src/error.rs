use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("resolution mismatch: field degree {field} exceeds grid degree {grid}")]
    Resolution { field: usize, grid: usize },

    #[error("degenerate surface: {0}")]
    DegenerateSurface(String),

    #[error("singular matrix (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("branch switch failed: {0}")]
    SwitchFailed(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown subgroup `{0}`")]
    UnknownSubgroup(String),

    #[error("group closure exceeded {0} elements")]
    ClosureBound(usize),

    #[error("fixed space of degree {l} for {group} has dimension {dim}, expected 1")]
    FixedSpaceDimension { l: usize, group: String, dim: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
