use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unknown vulnerability category `{0}`")]
    UnknownCategory(String),
    #[error("invalid spans in `{id}`: {reason}")]
    InvalidSpans { id: String, reason: String },
    #[error("invalid patch pair: {0}")]
    InvalidPatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty vocabulary after min-count filtering (min_count = {min_count}); lower min_count or supply a larger corpus")]
    EmptyVocabulary { min_count: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("stratified split requested but class {0} has no samples")]
    MissingClass(u8),
    #[error("class weights need both classes; only class {0} present")]
    SingleClass(u8),
    #[error("label {0} is not binary")]
    NonBinaryLabel(u8),
    #[error("length mismatch: {left} labels vs {right} scores")]
    LengthMismatch { left: usize, right: usize },
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("sequence length {length} is too short for the CNN pooling pyramid; minimum is {minimum}")]
    SequenceTooShort { length: usize, minimum: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("malformed parameter blob: {0}")]
    MalformedBlob(String),
    #[error("duplicate report for {0}")]
    DuplicateReport(String),
    #[error("encoder: {0}")]
    Encoder(String),
}

pub type Result<T> = core::result::Result<T, Error>;
