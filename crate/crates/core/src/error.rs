use thiserror::Error;

/// Errors produced by the completion toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("mode {mode} out of range for a tensor of order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("threshold must be non-negative, got {0}")]
    NegativeThreshold(f64),

    #[error("SVD failed to converge after {sweeps} sweeps")]
    SvdNoConvergence { sweeps: usize },

    #[error("degenerate Laplacian on mode {mode}: spectral norm is zero")]
    DegenerateLaplacian { mode: usize },

    #[error("factor matrix {mode} has zero nuclear norm")]
    ZeroFactor { mode: usize },

    #[error("observation mask has no observed entries")]
    EmptyMask,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("solver diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
