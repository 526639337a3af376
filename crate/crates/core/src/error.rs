use std::fmt;
use std::io;

/// Errors produced by the scoring library.
#[derive(Debug)]
pub enum Error {
    /// A scenario violated a structural rule (all-default cell, zero samples, ...).
    InvalidScenario(String),
    /// Two scenario specs share an id within one registry.
    DuplicateId(String),
    /// A scenario names a context the registry does not define.
    UnknownContext { scenario_id: String, context_id: String },
    /// A registry, config, or artifact file could not be parsed.
    Parse { context: String, message: String },
    /// A prompt template is malformed or lacks a required description override.
    Template(String),
    /// Generation failed after bounded retries; `progress` counts records
    /// already persisted to the cache.
    Generation { message: String, progress: usize },
    /// A single output record is unusable (empty text, schema mismatch).
    Record { detail: String, line: Option<usize> },
    /// Corpus too small to score.
    TooFewSamples { found: usize, need: usize },
    /// Embedding service failure or inconsistent vector dimensions.
    Embedder(String),
    /// A seed word has no supporting sentence in the pole corpora.
    MissingSupport { token: String },
    /// Axis norm below threshold; the two poles coincide.
    AxisDegenerate { norm: f64 },
    /// A stratified split cannot place every class in both partitions.
    Split(String),
    /// Training data contains only one class.
    SingleClass,
    /// Corpora were embedded with different embedders and cannot be compared.
    IncomparableCorpora { left: String, right: String },
    /// Vector dimensions disagree.
    DimensionMismatch { expected: usize, found: usize },
    /// An input that must be non-empty was empty.
    EmptyInput(String),
    /// A parameter is outside its valid range.
    InvalidArgument(String),
    /// Transport-level failure talking to an HTTP endpoint.
    Transport(String),
    /// Invariant breach that indicates a bug, not bad input.
    Internal(String),
    Io(io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidScenario(msg) => write!(f, "invalid scenario: {msg}"),
            Error::DuplicateId(id) => write!(f, "duplicate scenario id: {id}"),
            Error::UnknownContext { scenario_id, context_id } => {
                write!(f, "scenario {scenario_id} names unknown context {context_id}")
            }
            Error::Parse { context, message } => write!(f, "parse error in {context}: {message}"),
            Error::Template(msg) => write!(f, "template error: {msg}"),
            Error::Generation { message, progress } => {
                write!(f, "generation failed after {progress} records: {message}")
            }
            Error::Record { detail, line: Some(line) } => {
                write!(f, "bad record at line {line}: {detail}")
            }
            Error::Record { detail, line: None } => write!(f, "bad record: {detail}"),
            Error::TooFewSamples { found, need } => {
                write!(f, "too few samples: found {found}, need at least {need}")
            }
            Error::Embedder(msg) => write!(f, "embedder error: {msg}"),
            Error::MissingSupport { token } => {
                write!(f, "seed word '{token}' has no supporting sentence")
            }
            Error::AxisDegenerate { norm } => {
                write!(f, "axis degenerate: norm {norm:e} below threshold")
            }
            Error::Split(msg) => write!(f, "split error: {msg}"),
            Error::SingleClass => write!(f, "training set contains a single class"),
            Error::IncomparableCorpora { left, right } => {
                write!(f, "incomparable corpora: embedder {left} vs {right}")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Transport(msg) => write!(f, "transport error: {msg}"),
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(err: io::Error) -> Self {
        Error::Io(err)
    }
}
