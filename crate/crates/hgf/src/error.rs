//! One error type for the whole library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HgfError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("axis {axis} needs at least 8 points for the periodic stencils, got {points}")]
    TooFewPoints { axis: usize, points: usize },
    #[error("axis {axis} length must be positive, got {length}")]
    NonPositiveLength { axis: usize, length: f64 },
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("declared symmetry violated at node {node}, indices {indices:?}")]
    SymmetryViolation { node: usize, indices: Vec<usize> },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("metric not positive definite: smallest eigenvalue {min_eig:.3e} at node {node}")]
    SingularMetric { node: usize, min_eig: f64 },
    #[error("covector must be nonzero")]
    ZeroCovector,
    #[error("operation does not support tensor valence ({0}, {1})")]
    UnsupportedValence(u8, u8),
    #[error("need {needed} states, got {got}")]
    HistoryTooShort { needed: usize, got: usize },
    #[error("dt {dt:.6e} exceeds the CFL bound {bound:.6e}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("metric left the SPD cone at t = {time:.6}")]
    SpdLost { time: f64 },
    #[error("time {t} is past the degenerate time {degenerate}")]
    PastDegenerateTime { t: f64, degenerate: f64 },
    #[error("alpha coefficient vanishes at node {node}, component {comp}")]
    ZeroAlphaComponent { node: usize, comp: usize },
    #[error("variant not supported by this operation")]
    UnsupportedVariant,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("horizon {horizon} exceeds the wrap-around time {wrap}")]
    WrapAroundExceeded { horizon: f64, wrap: f64 },
    #[error("refinement study needs at least {needed} levels, got {got}")]
    InsufficientLevels { needed: usize, got: usize },
    #[error("nonfinite component at node {node}")]
    NonFinite { node: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad snapshot magic")]
    BadMagic,
    #[error("snapshot format version {0} unsupported")]
    VersionMismatch(u32),
    #[error("snapshot shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, HgfError>;
