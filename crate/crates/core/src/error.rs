use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("payload length mismatch: expected {expected} bytes, found {found}")]
    PayloadLength { expected: usize, found: usize },

    #[error("non-finite sample in channel {channel} at index {index}")]
    NonFiniteSample { channel: usize, index: usize },

    #[error("invalid sample rate {0}")]
    InvalidSampleRate(f64),

    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid filter specification: {0}")]
    FilterSpec(String),

    #[error("unstable filter: pole magnitude {0}")]
    UnstableFilter(f64),

    #[error("non-integer decimation factor {0}")]
    DecimationFactor(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("single-class input: {0}")]
    SingleClass(String),

    #[error("infeasible partition: {patients} patients cannot form {subsets} subsets of at least {min_size}")]
    Partition {
        patients: usize,
        subsets: usize,
        min_size: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
