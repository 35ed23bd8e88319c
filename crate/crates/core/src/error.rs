use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {required} samples, found {found}")]
    TooFewSamples { required: usize, found: usize },
    #[error("empty input")]
    Empty,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive semi-definite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("zero pooled variance")]
    ZeroPooledVariance,
    #[error("single-class input")]
    SingleClass,
    #[error("constant input: correlation undefined")]
    ConstantInput,
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown ids: {}", .0.join(","))]
    UnknownIds(Vec<String>),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("record `{id}` has no value for label `{label}`")]
    MissingLabel { id: String, label: String },
    #[error("value `{value}` not allowed for label `{label}`")]
    ValueOutsideSchema { label: String, value: String },
    #[error("record `{0}` has no group id")]
    MissingGroupId(String),
    #[error("confidence out of range: {value} for record `{id}`")]
    ConfidenceOutOfRange { id: String, value: f64 },
    #[error("record `{0}` has no confidence")]
    MissingConfidence(String),
    #[error("id overlap between train and test: `{0}`")]
    IdOverlap(String),
    #[error("problem too large for dense oracle: n = {0}")]
    OracleTooLarge(usize),
    #[error("action log out of order at sequence {0}")]
    LogOutOfOrder(u64),
}
