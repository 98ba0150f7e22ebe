use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("unknown sample {0:?}")]
    UnknownSample(String),
    #[error("corrupt tensor in sample {sample:?} at layer {layer}, head {head}, row {row}: {detail}")]
    CorruptTensor {
        sample: String,
        layer: usize,
        head: usize,
        row: usize,
        detail: String,
    },
    #[error("truncated file: need {needed} bytes, file has {actual}")]
    TruncatedFile { needed: u64, actual: u64 },
    #[error("heterogeneous shape: {0}")]
    HeterogeneousShape(String),
    #[error("duplicate sample id {0:?}")]
    DuplicateSampleId(String),
    #[error("invalid log-prob {value} in sample {sample:?} at position {position}")]
    InvalidLogProb {
        sample: String,
        position: usize,
        value: f32,
    },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid label {0} (expected 0 or 1)")]
    InvalidLabel(u8),
    #[error("empty token sequence")]
    EmptySequence,
    #[error("token id {id} at position {position} is outside vocabulary of size {vocab_size}")]
    TokenOutOfVocab {
        id: u32,
        position: usize,
        vocab_size: usize,
    },
    #[error("samples file line {line}: {message}")]
    BadSampleLine { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
