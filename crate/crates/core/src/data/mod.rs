//! Domain data model and the binary dump formats (ATND attention dumps,
//! LGPD log-probability dumps) shared with external exporters.
//!
//! Layers, heads, and token positions are 1-based in every user-facing
//! identifier (error messages, manifest metadata, feature names). Storage
//! and the accessor methods on [`AttentionStack`] are 0-based.

mod atnd;
mod error;
mod lgpd;
pub(crate) mod manifest;
mod samples;
mod sequence;
mod stack;

pub use atnd::{read_attention_dump, write_attention_dump, AttentionDump, DumpEntry, ATND_MAGIC};
pub use error::DataError;
pub use lgpd::{read_logprob_dump, write_logprob_dump, LogProbRecord, LGPD_MAGIC};
pub use manifest::{DumpManifest, LogProbManifest, ManifestEntry, FORMAT_VERSION};
pub use samples::{byte_tokens, read_samples, SampleLine, BYTE_VOCAB};
pub use sequence::{LabeledSample, TokenSequence};
pub use stack::{AttentionStack, AttnMap, ROW_SUM_TOLERANCE};
pub use manifest::hash64_hex;
