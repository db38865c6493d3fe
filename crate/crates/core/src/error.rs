use thiserror::Error;

/// Errors produced by the simulation and numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("root finding did not converge for {what}")]
    NoConvergence { what: &'static str },

    #[error("dimension n = {n} exceeds the {limit} cap of {cap}")]
    Capacity { n: u32, cap: u32, limit: &'static str },

    #[error("step cap of {cap} exceeded before the clock reached the horizon {horizon}")]
    StepCap { cap: u64, horizon: f64 },

    #[error("path ends at rescaled time {end} before the requested point {needed}")]
    InsufficientHorizon { end: f64, needed: f64 },

    #[error("vertices at distance {distance} lie in different parity classes")]
    ParityMismatch { distance: u32 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("schema mismatch in {path}: {reason}")]
    Schema { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
