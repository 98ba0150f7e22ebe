use std::io::{Read, Write};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DataError;

pub const FORMAT_VERSION: u16 = 1;

/// Per-sample manifest row. `offset` is relative to the first payload byte.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub seq_len: usize,
    pub offset: u64,
    pub length: u64,
    pub label: u8,
    #[serde(default)]
    pub group: Option<String>,
}

/// JSON header of an ATND attention dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpManifest {
    pub format_version: u16,
    pub model_tag: String,
    pub layers: usize,
    pub heads: usize,
    /// Absent in files from exporters that omit it; the reader then infers
    /// causality from the payload.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub causal: Option<bool>,
    pub samples: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_hash: Option<String>,
}

/// JSON header of an LGPD log-prob dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogProbManifest {
    pub format_version: u16,
    pub model_tag: String,
    pub samples: Vec<LogProbEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogProbEntry {
    pub id: String,
    pub seq_len: usize,
    pub offset: u64,
    pub length: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

pub(crate) trait Hashed: Serialize + Clone {
    fn hash_slot(&mut self) -> &mut Option<String>;

    /// 64-bit content hash (hex) of the header with the hash slot cleared.
    fn content_hash(&self) -> String {
        let mut bare = self.clone();
        *bare.hash_slot() = None;
        let json = serde_json::to_vec(&bare).expect("manifest serializes");
        hash64_hex(&json)
    }

    fn seal(&mut self) {
        let h = self.content_hash();
        *self.hash_slot() = Some(h);
    }

    /// Fails when a recorded hash disagrees with the content.
    fn check_hash(&self) -> Result<(), DataError> {
        let mut me = self.clone();
        if let Some(recorded) = me.hash_slot().clone() {
            let actual = self.content_hash();
            if recorded != actual {
                return Err(DataError::BadHeader(format!(
                    "schema_hash {recorded} does not match header content ({actual})"
                )));
            }
        }
        Ok(())
    }
}

impl Hashed for DumpManifest {
    fn hash_slot(&mut self) -> &mut Option<String> {
        &mut self.schema_hash
    }
}

impl Hashed for LogProbManifest {
    fn hash_slot(&mut self) -> &mut Option<String> {
        &mut self.schema_hash
    }
}

/// First 8 bytes of SHA-256, as 16 lowercase hex digits.
pub fn hash64_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    format!("{:016x}", u64::from_be_bytes(word))
}

pub(crate) const PREAMBLE_LEN: u64 = 4 + 2 + 4;

pub(crate) fn write_framed<W: Write, H: Serialize>(
    out: &mut W,
    magic: &[u8; 4],
    header: &H,
) -> Result<(), DataError> {
    let json = serde_json::to_vec(header).map_err(|e| DataError::BadHeader(e.to_string()))?;
    out.write_all(magic)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    Ok(())
}

/// Reads magic, version, and JSON header. Returns the header and the absolute
/// offset of the payload region.
pub(crate) fn read_framed<R: Read, H: DeserializeOwned>(
    input: &mut R,
    magic: &[u8; 4],
    file_len: u64,
) -> Result<(H, u64), DataError> {
    let mut pre = [0u8; PREAMBLE_LEN as usize];
    read_exact_or_truncated(input, &mut pre, PREAMBLE_LEN, file_len)?;
    if &pre[..4] != magic {
        return Err(DataError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&pre[..4]).into_owned(),
        });
    }
    let version = u16::from_le_bytes([pre[4], pre[5]]);
    if version != FORMAT_VERSION {
        return Err(DataError::UnsupportedVersion(version));
    }
    let header_len = u32::from_le_bytes([pre[6], pre[7], pre[8], pre[9]]) as u64;
    let mut json = vec![0u8; header_len as usize];
    read_exact_or_truncated(input, &mut json, PREAMBLE_LEN + header_len, file_len)?;
    let header: H =
        serde_json::from_slice(&json).map_err(|e| DataError::BadHeader(e.to_string()))?;
    Ok((header, PREAMBLE_LEN + header_len))
}

fn read_exact_or_truncated<R: Read>(
    input: &mut R,
    buf: &mut [u8],
    needed: u64,
    file_len: u64,
) -> Result<(), DataError> {
    match input.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(DataError::TruncatedFile {
            needed,
            actual: file_len,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Checks that `(offset, length)` ranges are ordered and non-overlapping and
/// returns the end of the last one.
pub(crate) fn check_layout<'a>(
    ranges: impl Iterator<Item = (&'a str, u64, u64)>,
) -> Result<u64, DataError> {
    let mut end = 0u64;
    let mut seen = std::collections::HashSet::new();
    for (id, offset, length) in ranges {
        if !seen.insert(id) {
            return Err(DataError::DuplicateSampleId(id.to_string()));
        }
        if offset < end {
            return Err(DataError::BadHeader(format!(
                "payload of {id:?} at offset {offset} overlaps previous payload ending at {end}"
            )));
        }
        end = offset + length;
    }
    Ok(end)
}
