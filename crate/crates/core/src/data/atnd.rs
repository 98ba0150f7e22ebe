use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::manifest::{check_layout, read_framed, write_framed, Hashed};
use super::{AttentionStack, DataError, DumpManifest, ManifestEntry, FORMAT_VERSION};

pub const ATND_MAGIC: &[u8; 4] = b"ATND";

/// One sample of an attention dump, as written and as read back.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpEntry {
    pub id: String,
    pub stack: AttentionStack,
    pub label: u8,
    pub group: Option<String>,
}

impl DumpEntry {
    pub fn new(id: impl Into<String>, stack: AttentionStack, label: u8) -> Self {
        Self {
            id: id.into(),
            stack,
            label,
            group: None,
        }
    }

    pub fn with_group(mut self, group: Option<String>) -> Self {
        self.group = group;
        self
    }
}

fn payload_len(layers: usize, heads: usize, seq_len: usize) -> u64 {
    (layers * heads * seq_len * seq_len * 4) as u64
}

/// Builds the sealed manifest for `entries`, checking shape homogeneity.
fn build_manifest(entries: &[DumpEntry], model_tag: &str) -> Result<DumpManifest, DataError> {
    let (layers, heads, causal) = match entries.first() {
        Some(e) => (e.stack.layers(), e.stack.heads(), Some(e.stack.is_causal())),
        None => (0, 0, Some(true)),
    };
    let mut seen = HashSet::new();
    let mut offset = 0u64;
    let mut samples = Vec::with_capacity(entries.len());
    for e in entries {
        if e.stack.layers() != layers || e.stack.heads() != heads {
            return Err(DataError::HeterogeneousShape(format!(
                "sample {:?} has L={}, H={} but the dump has L={layers}, H={heads}",
                e.id,
                e.stack.layers(),
                e.stack.heads()
            )));
        }
        if Some(e.stack.is_causal()) != causal {
            return Err(DataError::HeterogeneousShape(format!(
                "sample {:?} differs in causal flag",
                e.id
            )));
        }
        if e.label > 1 {
            return Err(DataError::InvalidLabel(e.label));
        }
        if !seen.insert(e.id.as_str()) {
            return Err(DataError::DuplicateSampleId(e.id.clone()));
        }
        let length = payload_len(layers, heads, e.stack.seq_len());
        samples.push(ManifestEntry {
            id: e.id.clone(),
            seq_len: e.stack.seq_len(),
            offset,
            length,
            label: e.label,
            group: e.group.clone(),
        });
        offset += length;
    }
    let mut manifest = DumpManifest {
        format_version: FORMAT_VERSION,
        model_tag: model_tag.to_string(),
        layers,
        heads,
        causal,
        samples,
        schema_hash: None,
    };
    manifest.seal();
    Ok(manifest)
}

/// Writes an ATND file. Output bytes depend only on the inputs.
pub fn write_attention_dump(
    entries: &[DumpEntry],
    model_tag: &str,
    path: impl AsRef<Path>,
) -> Result<(), DataError> {
    let manifest = build_manifest(entries, model_tag)?;
    let mut out = BufWriter::new(File::create(path)?);
    write_framed(&mut out, ATND_MAGIC, &manifest)?;
    for e in entries {
        for v in e.stack.as_slice() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// An opened ATND file. Only the header is held in memory; payloads are read
/// on demand, so one handle can serve concurrent readers.
#[derive(Debug, Clone)]
pub struct AttentionDump {
    path: PathBuf,
    manifest: DumpManifest,
    payload_start: u64,
    index: HashMap<String, usize>,
}

impl AttentionDump {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path)?;
        let file_len = file.metadata()?.len();
        let mut reader = BufReader::new(file);
        let (manifest, payload_start): (DumpManifest, u64) =
            read_framed(&mut reader, ATND_MAGIC, file_len)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(DataError::UnsupportedVersion(manifest.format_version));
        }
        manifest.check_hash()?;
        if !manifest.samples.is_empty() && (manifest.layers == 0 || manifest.heads == 0) {
            return Err(DataError::BadHeader("layers and heads must be positive".into()));
        }
        for s in &manifest.samples {
            let expected = payload_len(manifest.layers, manifest.heads, s.seq_len);
            if s.seq_len == 0 || s.length != expected {
                return Err(DataError::BadHeader(format!(
                    "sample {:?}: length {} does not match L*H*T*T*4 = {expected}",
                    s.id, s.length
                )));
            }
            if s.label > 1 {
                return Err(DataError::InvalidLabel(s.label));
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
        let index = manifest
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.clone(), i))
            .collect();
        Ok(Self {
            path,
            manifest,
            payload_start,
            index,
        })
    }

    pub fn manifest(&self) -> &DumpManifest {
        &self.manifest
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.manifest.samples
    }

    pub fn model_tag(&self) -> &str {
        &self.manifest.model_tag
    }

    pub fn layers(&self) -> usize {
        self.manifest.layers
    }

    pub fn heads(&self) -> usize {
        self.manifest.heads
    }

    pub fn len(&self) -> usize {
        self.manifest.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.samples.is_empty()
    }

    pub fn contains(&self, sample_id: &str) -> bool {
        self.index.contains_key(sample_id)
    }

    pub fn entry(&self, sample_id: &str) -> Option<&ManifestEntry> {
        self.index.get(sample_id).map(|&i| &self.manifest.samples[i])
    }

    /// Reads and validates one sample's stack.
    pub fn read(&self, sample_id: &str) -> Result<AttentionStack, DataError> {
        let idx = *self
            .index
            .get(sample_id)
            .ok_or_else(|| DataError::UnknownSample(sample_id.to_string()))?;
        self.read_index(idx)
    }

    fn read_index(&self, idx: usize) -> Result<AttentionStack, DataError> {
        let entry = &self.manifest.samples[idx];
        let mut file = File::open(&self.path)?;
        file.seek(SeekFrom::Start(self.payload_start + entry.offset))?;
        let mut bytes = vec![0u8; entry.length as usize];
        file.read_exact(&mut bytes).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => DataError::TruncatedFile {
                needed: self.payload_start + entry.offset + entry.length,
                actual: std::fs::metadata(&self.path).map(|m| m.len()).unwrap_or(0),
            },
            _ => e.into(),
        })?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let causal = match self.manifest.causal {
            Some(c) => c,
            None => upper_triangle_is_zero(&data, entry.seq_len),
        };
        let stack = AttentionStack::new(
            self.manifest.layers,
            self.manifest.heads,
            entry.seq_len,
            causal,
            data,
        )?;
        stack.validate(&entry.id)?;
        Ok(stack)
    }

    /// Reads every sample in manifest order.
    pub fn read_all(&self) -> Result<Vec<DumpEntry>, DataError> {
        (0..self.len())
            .map(|i| {
                let m = &self.manifest.samples[i];
                Ok(DumpEntry {
                    id: m.id.clone(),
                    stack: self.read_index(i)?,
                    label: m.label,
                    group: m.group.clone(),
                })
            })
            .collect()
    }
}

fn upper_triangle_is_zero(data: &[f32], t: usize) -> bool {
    data.chunks_exact(t * t).all(|map| {
        (0..t).all(|i| map[i * t + i + 1..(i + 1) * t].iter().all(|&v| v == 0.0))
    })
}

/// Opens `path` and reads a single sample.
pub fn read_attention_dump(
    path: impl AsRef<Path>,
    sample_id: &str,
) -> Result<AttentionStack, DataError> {
    AttentionDump::open(path)?.read(sample_id)
}
