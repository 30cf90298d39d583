use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("malformed bit stream at offset {offset}")]
    MalformedStream { offset: usize },
    #[error("exhaustive oracle refuses n = {0} (limit 8)")]
    OracleTooLarge(usize),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("spans overlap: [{0}, {1}) and [{2}, {3})")]
    SpanOverlap(usize, usize, usize, usize),
    #[error("span mismatch: {0}")]
    SpanMismatch(String),
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("resource bound exceeded: {needed} branches > limit {limit}; {hint}")]
    ResourceLimit { needed: u128, limit: u128, hint: String },
    #[error("ownership violation: {0}")]
    Ownership(String),
    #[error("session error: {0}")]
    Session(String),
    #[error("parse error: {0}")]
    Parse(String),
}
