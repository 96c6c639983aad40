use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("time grid needs at least one step")]
    ZeroSteps,

    #[error("horizon must be finite and positive, got {0}")]
    InvalidHorizon(f64),

    #[error("at least one path is required")]
    NoPaths,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("nearest-point solver did not converge (residual {residual:e})")]
    NoConvergence { best: Vec<f64>, residual: f64 },

    #[error("{0} is not available on a piecewise-smooth manifold")]
    PiecewiseUnsupported(&'static str),

    #[error("point at distance {distance} lies outside the reach {reach}")]
    OutsideReach { distance: f64, reach: f64 },

    #[error("projection is not unique at the query point")]
    NonUniqueProjection,

    #[error("band width {width} must be < reach {reach}")]
    BandExceedsReach { width: f64, reach: f64 },

    #[error("level spacing {spacing} exceeds bandwidth {eps}: coverage gap")]
    CoverageGap { spacing: f64, eps: f64 },

    #[error("bandwidth must be finite and positive, got {0}")]
    InvalidBandwidth(f64),

    #[error("non-finite integrand value {value} at path {path}, step {step}")]
    NonFiniteIntegrand {
        path: usize,
        step: usize,
        value: f64,
    },

    #[error("manifold is not a graph")]
    NotAGraph,

    #[error("occupation measure is empty")]
    EmptyMeasure,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
