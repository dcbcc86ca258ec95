use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time grid is under-resolved: dt*max(omega, gamma^2) = {product:.4} exceeds {limit}")]
    UnderResolved { product: f64, limit: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("need at least {required} samples, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("displacement |z|^2 = {norm_sqr:.3} does not fit truncation dim {dim} (limit {limit:.3})")]
    TruncationTooSmall { norm_sqr: f64, dim: usize, limit: f64 },

    #[error("near-degenerate denominator in closed form: {0}")]
    Degenerate(String),

    #[error("scaling precondition violated: {0}")]
    Scaling(String),

    #[error("malformed path dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
