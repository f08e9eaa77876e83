use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("zero vector is outside the domain of {op}")]
    ZeroVector { op: &'static str },

    #[error("direction must be a unit vector (got |v| = {norm:.3e})")]
    NotUnit { norm: f64 },

    #[error("unsupported hypersurface dimension n = {n} (expected 1 or 2)")]
    UnsupportedDimension { n: usize },

    #[error("ambient dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "anisotropy violates the convexity condition: min tangential eigenvalue \
         {min_eigenvalue:.6e} at direction {witness:?}"
    )]
    NotConvex {
        min_eigenvalue: f64,
        witness: Vec<f64>,
    },

    #[error("grid resolution {resolution} is below the minimum of {min}")]
    ResolutionTooSmall { resolution: usize, min: usize },

    #[error("degenerate surface metric at node {node}: det g = {det:.6e}")]
    DegenerateMetric { node: usize, det: f64 },

    #[error("radial graph is non-positive at node {node}: r = {value:.6e}")]
    NonPositiveRadius { node: usize, value: f64 },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("L^p exponent must satisfy p >= 1 (or infinity), got {p}")]
    BadLpExponent { p: f64 },

    #[error("exponent constraint violated: {message}")]
    BadExponent { message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}
