use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("generation {requested} is below the cube generation {cube}")]
    GenerationBelowCube { requested: u64, cube: u64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("empty domain: {0}")]
    EmptyDomain(String),
    #[error("grid is missing q = {0}")]
    MissingGridPoint(f64),
    #[error("unattainable parameters: {0}")]
    Unattainable(String),
    #[error("empty type-class selection: {0}")]
    EmptySelection(String),
    #[error("search capped at N = {cap}: {what}")]
    GenerationCap { cap: u64, what: String },
    #[error("stage {stage}: normalizer Z = {z} below 1/2")]
    NormalizerTooSmall { stage: usize, z: f64 },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("ordering violated: {0}")]
    NotDominated(String),
}

pub type Result<T> = std::result::Result<T, Error>;
