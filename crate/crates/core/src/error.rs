use std::path::PathBuf;

use thiserror::Error;

use crate::ingest::ModuleId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} at line {line} is not strictly greater than the previous index")]
    NonMonotonicIndex { line: u64, index: u64 },

    #[error("value {value} at line {line} is outside [{min}, {max}]")]
    OutOfRange {
        line: u64,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("stream {0} has no valid frames")]
    NoValidFrames(ModuleId),

    #[error("fps mismatch: session runs at {expected} fps but a stream reports {found}")]
    FpsMismatch { expected: u32, found: u32 },

    #[error("window ending at second {end_second} (length {window_seconds}) is outside the session of {duration_seconds} s")]
    WindowOutOfRange {
        end_second: u64,
        window_seconds: u64,
        duration_seconds: u64,
    },

    #[error("module {0} is not present")]
    MissingModule(ModuleId),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("no labeled samples remain after thresholding and validity filtering")]
    NoLabeledSamples,

    #[error("both classes are required, but only one is present")]
    SingleClass,

    #[error("sample is missing a score for module {0}")]
    MissingScore(ModuleId),

    #[error("at least {required} scores are required, got {found}")]
    TooFewScores { required: usize, found: usize },

    #[error("at least 2 users are required, got {0}")]
    TooFewUsers(usize),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("protocol leakage: {0}")]
    Leakage(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedRow { .. } => "MalformedRow",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonMonotonicIndex { .. } => "NonMonotonicIndex",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::NoValidFrames(_) => "NoValidFrames",
            Error::FpsMismatch { .. } => "FpsMismatch",
            Error::WindowOutOfRange { .. } => "WindowOutOfRange",
            Error::MissingModule(_) => "MissingModule",
            Error::EmptyInput(_) => "EmptyInput",
            Error::NoLabeledSamples => "NoLabeledSamples",
            Error::SingleClass => "SingleClass",
            Error::MissingScore(_) => "MissingScore",
            Error::TooFewScores { .. } => "TooFewScores",
            Error::TooFewUsers(_) => "TooFewUsers",
            Error::InvalidParams(_) => "InvalidParams",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Usage(_) => "Usage",
            Error::Leakage(_) => "Leakage",
            Error::Numerical(_) => "Numerical",
            Error::Io { .. } => "IoError",
            Error::Json(_) => "JsonError",
        }
    }
}
