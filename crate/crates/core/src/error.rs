use alloc::string::String;

/// Errors raised by model construction and the estimation pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid rank {rank}: must be between 1 and {max}")]
    InvalidRank { rank: usize, max: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("index {index} out of range for mode {mode} of size {size}")]
    IndexOutOfRange { mode: usize, index: usize, size: usize },
    #[error("value {value} outside [-1, 1]")]
    ValueOutOfRange { value: f64 },
    #[error("density {0} outside (0, 1]")]
    InvalidDensity(f64),
    #[error("noise amplitude {noise} leaves no headroom over function bound {bound}")]
    NoiseHeadroom { noise: f64, bound: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mode pair ({y}, {z}) is invalid for order {order}")]
    InvalidModePair { y: usize, z: usize, order: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("sample density p·n^(t-1) = {0} is not above 1")]
    BelowConnectivity(f64),
    #[error("tree too shallow: level {requested} requested but depth {reached} reached")]
    TreeTooShallow { requested: usize, reached: usize },
    #[error("no observations available for {0}")]
    NoObservations(&'static str),
    #[error("instance too large for {what}: {size} > {limit}")]
    SizeGuard {
        what: &'static str,
        size: usize,
        limit: usize,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
