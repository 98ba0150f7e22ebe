use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::manifest::{check_layout, read_framed, write_framed, Hashed, LogProbEntry};
use super::{DataError, LogProbManifest, FORMAT_VERSION};

pub const LGPD_MAGIC: &[u8; 4] = b"LGPD";

/// Natural-log probabilities of tokens 2..T given their prefixes.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbRecord {
    pub sample_id: String,
    pub token_logprobs: Vec<f32>,
    pub model_tag: String,
    /// Membership label carried through the dump manifest, when known.
    pub label: Option<u8>,
}

impl LogProbRecord {
    pub fn new(sample_id: impl Into<String>, token_logprobs: Vec<f32>, model_tag: impl Into<String>) -> Self {
        Self {
            sample_id: sample_id.into(),
            token_logprobs,
            model_tag: model_tag.into(),
            label: None,
        }
    }

    pub fn with_label(mut self, label: u8) -> Self {
        self.label = Some(label);
        self
    }

    /// Sequence length T of the scored sample.
    pub fn seq_len(&self) -> usize {
        self.token_logprobs.len() + 1
    }

    pub fn validate(&self) -> Result<(), DataError> {
        match self
            .token_logprobs
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v <= 0.0))
        {
            Some((i, &v)) => Err(DataError::InvalidLogProb {
                sample: self.sample_id.clone(),
                position: i + 2,
                value: v,
            }),
            None => Ok(()),
        }
    }
}

pub fn write_logprob_dump(records: &[LogProbRecord], path: impl AsRef<Path>) -> Result<(), DataError> {
    let model_tag = records.first().map(|r| r.model_tag.clone()).unwrap_or_default();
    let mut seen = HashSet::new();
    let mut offset = 0u64;
    let mut samples = Vec::with_capacity(records.len());
    for r in records {
        if r.model_tag != model_tag {
            return Err(DataError::HeterogeneousShape(format!(
                "record {:?} has model tag {:?}, dump has {model_tag:?}",
                r.sample_id, r.model_tag
            )));
        }
        if !seen.insert(r.sample_id.as_str()) {
            return Err(DataError::DuplicateSampleId(r.sample_id.clone()));
        }
        if let Some(l) = r.label {
            if l > 1 {
                return Err(DataError::InvalidLabel(l));
            }
        }
        r.validate()?;
        let length = (r.token_logprobs.len() * 4) as u64;
        samples.push(LogProbEntry {
            id: r.sample_id.clone(),
            seq_len: r.seq_len(),
            offset,
            length,
            label: r.label,
        });
        offset += length;
    }
    let mut manifest = LogProbManifest {
        format_version: FORMAT_VERSION,
        model_tag,
        samples,
        schema_hash: None,
    };
    manifest.seal();
    let mut out = BufWriter::new(File::create(path)?);
    write_framed(&mut out, LGPD_MAGIC, &manifest)?;
    for r in records {
        for v in &r.token_logprobs {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads every record of an LGPD file in manifest order.
pub fn read_logprob_dump(path: impl AsRef<Path>) -> Result<Vec<LogProbRecord>, DataError> {
    let file = File::open(path)?;
    let file_len = file.metadata()?.len();
    let mut reader = BufReader::new(file);
    let (manifest, payload_start): (LogProbManifest, u64) =
        read_framed(&mut reader, LGPD_MAGIC, file_len)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(DataError::UnsupportedVersion(manifest.format_version));
    }
    manifest.check_hash()?;
    for s in &manifest.samples {
        if s.seq_len == 0 || s.length != ((s.seq_len - 1) * 4) as u64 {
            return Err(DataError::BadHeader(format!(
                "sample {:?}: length {} does not match (T-1)*4 for T={}",
                s.id, s.length, s.seq_len
            )));
        }
    }
    let end = check_layout(
        manifest
            .samples
            .iter()
            .map(|s| (s.id.as_str(), s.offset, s.length)),
    )?;
    if payload_start + end > file_len {
        return Err(DataError::TruncatedFile {
            needed: payload_start + end,
            actual: file_len,
        });
    }
    let mut payload = vec![0u8; (file_len - payload_start) as usize];
    reader.read_exact(&mut payload)?;
    manifest
        .samples
        .iter()
        .map(|s| {
            let bytes = &payload[s.offset as usize..(s.offset + s.length) as usize];
            let rec = LogProbRecord {
                sample_id: s.id.clone(),
                token_logprobs: bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
                model_tag: manifest.model_tag.clone(),
                label: s.label,
            };
            rec.validate()?;
            Ok(rec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.lgpd");
        let rec = LogProbRecord::new("a", vec![-0.5], "m");
        write_logprob_dump(std::slice::from_ref(&rec), &p).unwrap();
        let back = read_logprob_dump(&p).unwrap();
        assert_eq!(back, vec![rec]);
        assert_eq!(back[0].token_logprobs[0].to_bits(), (-0.5f32).to_bits());
    }

    #[test]
    fn positive_logprob_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let r = write_logprob_dump(&[LogProbRecord::new("a", vec![0.1], "m")], dir.path().join("x"));
        assert!(matches!(r, Err(DataError::InvalidLogProb { position: 2, .. })));
        let r = write_logprob_dump(&[LogProbRecord::new("a", vec![f32::NAN], "m")], dir.path().join("x"));
        assert!(r.is_err());
    }

    #[test]
    fn wrong_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.lgpd");
        write_logprob_dump(&[LogProbRecord::new("a", vec![-1.0], "m")], &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[..4].copy_from_slice(b"ATND");
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(read_logprob_dump(&p), Err(DataError::BadMagic { .. })));
    }

    #[test]
    fn single_token_record_has_empty_payload() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.lgpd");
        let recs = vec![
            LogProbRecord::new("a", vec![], "m").with_label(1),
            LogProbRecord::new("b", vec![-2.0, -0.25], "m").with_label(0),
        ];
        write_logprob_dump(&recs, &p).unwrap();
        assert_eq!(read_logprob_dump(&p).unwrap(), recs);
    }
}
