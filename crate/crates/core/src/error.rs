use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("{op}: non-finite value in result")]
    Numeric { op: &'static str },

    #[error("{op}: axis {axis} out of range for tensor of rank {rank}")]
    Axis {
        op: &'static str,
        axis: usize,
        rank: usize,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("{layer}: sequence of length {len} is shorter than required {required}")]
    SequenceTooShort {
        layer: &'static str,
        len: usize,
        required: usize,
    },

    #[error("{layer}: empty input sequence")]
    EmptySequence { layer: &'static str },

    #[error("{layer}: backward called without a cached forward pass")]
    MissingCache { layer: &'static str },

    #[error("degenerate normalization range for feature `{feature}` (min = max = {value})")]
    DegenerateFeature { feature: String, value: f64 },

    #[error("unknown wind direction token `{0}`")]
    UnknownWindToken(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("too few samples to split: {n} (need at least 3)")]
    TooFewSamples { n: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    Divergence { epoch: usize, batch: usize },

    #[error("model file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("not a model file (bad magic bytes)")]
    BadMagic,

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("model checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("malformed model file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 1 I/O, 2 config/validation, 3 numeric divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 1,
            Error::Csv(e) if e.is_io_error() => 1,
            Error::Numeric { .. } | Error::Divergence { .. } => 3,
            _ => 2,
        }
    }
}
