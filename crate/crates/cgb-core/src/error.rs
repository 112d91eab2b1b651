use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("parity error: {0}")]
    Parity(&'static str),
    #[error("ordering is not a permutation of the {expected} generators")]
    IncompleteOrdering { expected: usize },
    #[error("matrix is not skew-symmetric (residual {residual:e})")]
    NotSkew { residual: f64 },
    #[error("odd dimension {0}")]
    OddDimension(usize),
    #[error("exact backend cannot exponentiate a nonzero scalar part")]
    Transcendental,
    #[error("point {point:?} outside chart domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("degenerate critical point at {point:?} in chart {chart} (det Hess = {det:e})")]
    DegenerateCritical { chart: usize, point: Vec<f64>, det: f64 },
    #[error("resolution {have} on axis {axis} is too coarse for lambda = {lambda}; use at least {need}")]
    Resolution { axis: usize, have: usize, need: usize, lambda: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown name `{0}`")]
    UnknownName(String),
}

pub type Result<T> = core::result::Result<T, Error>;
