use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("band index {index} outside family range [{lo}, {hi}]")]
    BandOutOfRange { index: i32, lo: i32, hi: i32 },

    #[error("direct bilinear sum over {modes} modes exceeds the size guard")]
    SizeGuard { modes: usize },

    #[error("symbol not supported by this evaluation path: {0}")]
    UnsupportedSymbol(String),

    #[error("decomposition residual {residual:e} exceeds tolerance {tolerance:e}")]
    NotBandLimited { residual: f64, tolerance: f64 },

    #[error("estimate spec invalid for `{kind}`: {reason}")]
    InvalidSpec { kind: String, reason: String },

    #[error("invalid plan at `{path}`: {reason}")]
    InvalidPlan { path: String, reason: String },

    #[error("malformed field dump: {0}")]
    MalformedDump(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
