use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("lift degree q = {q} is smaller than polynomial degree {degree}")]
    Degree { q: usize, degree: usize },

    #[error("erasure probability {0} outside (0, 1)")]
    InvalidChannel(f64),

    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
