use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A lookup game was queried for a coalition missing from its table.
    #[error("coalition {0} is not present in the game table")]
    LookupMiss(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("budget {budget} is outside the admissible range [{min}, {max}]")]
    Budget { budget: usize, min: usize, max: u128 },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("player count {d} exceeds the limit of {max} for this operation")]
    TooLarge { d: usize, max: usize },

    #[error("scores within size {size} vary by {deviation:e}; frontier is not size-symmetric")]
    NotSizeSymmetric { size: usize, deviation: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
