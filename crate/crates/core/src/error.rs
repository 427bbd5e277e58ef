use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite (pivot {pivot} = {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("{rows}x{cols} matrix has rank {rank}: neither full row nor full column rank")]
    RankDeficient { rows: usize, cols: usize, rank: usize },
    #[error("T V differs from V by {0:.3e}; V does not span fixed points of T")]
    NotFixed(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("row {0} of A is zero")]
    ZeroRow(usize),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
