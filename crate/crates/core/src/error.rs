use thiserror::Error;

use crate::fields::AxisKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel scale {scale} is below two grid spacings ({min}) on axis {axis}")]
    ScaleTooSmall { axis: AxisKind, scale: f64, min: f64 },

    #[error("kernel scale {scale} exceeds a quarter of the period ({max}) on axis {axis}")]
    ScaleTooLarge { axis: AxisKind, scale: f64, max: f64 },

    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("pair sum over {points} points exceeds the budget of {budget} pairs")]
    DimensionTooLarge { points: usize, budget: u128 },

    #[error("negative density {value} at flat index {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("unsupported exponent p = {0} in strict synthesis mode")]
    UnsupportedExponent(f64),

    #[error("index {index} out of range for axis {axis} of length {len}")]
    IndexOutOfRange { axis: AxisKind, index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("time step {dt} exceeds the CFL guard {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("insufficient points for a rate fit: {usable} usable, at least 3 required")]
    InsufficientPoints { usable: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("container checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("malformed container: {0}")]
    Container(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
