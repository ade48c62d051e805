use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid band set: {0}")]
    InvalidBand(String),
    #[error("band set is not symmetric about zero; real kernels need Q = -Q")]
    AsymmetricBand,
    #[error("time grid has {points} points, the oversampling rule needs at least {required}")]
    GridTooCoarse { points: usize, required: usize },
    #[error("eigensolver failed to converge (max residual {residual:e})")]
    EigenNonConvergence { residual: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operands live on different time grids")]
    GridMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("enumeration would produce about {estimate} allocations, above the cap of {cap}")]
    EnumerationCap { estimate: u128, cap: usize },
    #[error("exact cover requested for {points} points, exhaustive search is capped at {cap}")]
    ExactCoverCap { points: usize, cap: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
