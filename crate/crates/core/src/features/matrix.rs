use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureSchema, FeatureVector};

/// Feature vectors for a set of samples under one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub schema: FeatureSchema,
    pub vectors: Vec<FeatureVector>,
}

impl FeatureSet {
    pub fn new(schema: FeatureSchema, vectors: Vec<FeatureVector>) -> Result<Self, FeatureError> {
        for v in &vectors {
            if v.schema_hash != schema.hash() {
                return Err(FeatureError::SchemaMismatch {
                    expected: schema.hash().to_string(),
                    found: v.schema_hash.clone(),
                });
            }
            if v.values.len() != schema.len() {
                return Err(FeatureError::LengthMismatch {
                    sample: v.sample_id.clone(),
                    expected: schema.len(),
                    found: v.values.len(),
                });
            }
        }
        Ok(Self { schema, vectors })
    }
}

/// Row-major samples × features matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub schema: FeatureSchema,
    pub sample_ids: Vec<String>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(
        schema: FeatureSchema,
        sample_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, FeatureError> {
        let n = schema.len();
        let mut data = Vec::with_capacity(rows.len() * n);
        for (id, row) in sample_ids.iter().zip(&rows) {
            if row.len() != n {
                return Err(FeatureError::LengthMismatch {
                    sample: id.clone(),
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        if sample_ids.len() != rows.len() {
            return Err(FeatureError::SampleSetMismatch(format!(
                "{} ids for {} rows",
                sample_ids.len(),
                rows.len()
            )));
        }
        Ok(Self {
            schema,
            sample_ids,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_cols();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row(i)[j]).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn vector(&self, i: usize) -> FeatureVector {
        FeatureVector {
            sample_id: self.sample_ids[i].clone(),
            values: self.row(i).to_vec(),
            schema_hash: self.schema.hash().to_string(),
        }
    }

    /// Keeps only the given column indices under `schema`.
    pub fn select_columns(&self, idx: &[usize], schema: FeatureSchema) -> FeatureMatrix {
        let mut data = Vec::with_capacity(self.n_rows() * idx.len());
        for row in self.rows() {
            data.extend(idx.iter().map(|&j| row[j]));
        }
        FeatureMatrix {
            schema,
            sample_ids: self.sample_ids.clone(),
            data,
        }
    }

    /// Reorders rows to follow `order` (sample ids).
    pub fn reorder(&self, order: &[String]) -> Result<FeatureMatrix, FeatureError> {
        let pos: HashMap<&str, usize> = self
            .sample_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut rows = Vec::with_capacity(order.len());
        for id in order {
            let i = *pos
                .get(id.as_str())
                .ok_or_else(|| FeatureError::SampleSetMismatch(format!("sample {id:?} not in matrix")))?;
            rows.push(self.row(i).to_vec());
        }
        FeatureMatrix::from_rows(self.schema.clone(), order.to_vec(), rows)
    }
}

/// Concatenates feature sets per sample, in part order. Row order follows
/// the first part.
pub fn aggregate_features(parts: &[FeatureSet]) -> Result<FeatureMatrix, FeatureError> {
    let Some(first) = parts.first() else {
        return FeatureMatrix::from_rows(FeatureSchema::new(vec![])?, vec![], vec![]);
    };
    let schema = FeatureSchema::concat(&parts.iter().map(|p| &p.schema).collect::<Vec<_>>())?;
    let order: Vec<String> = first.vectors.iter().map(|v| v.sample_id.clone()).collect();
    let wanted: HashSet<&str> = order.iter().map(String::as_str).collect();
    let mut lookups = Vec::with_capacity(parts.len());
    for part in parts {
        let map: HashMap<&str, &FeatureVector> =
            part.vectors.iter().map(|v| (v.sample_id.as_str(), v)).collect();
        if let Some(extra) = part.vectors.iter().find(|v| !wanted.contains(v.sample_id.as_str())) {
            return Err(FeatureError::SampleSetMismatch(format!(
                "sample {:?} is missing from the first part",
                extra.sample_id
            )));
        }
        if let Some(missing) = order.iter().find(|id| !map.contains_key(id.as_str())) {
            return Err(FeatureError::SampleSetMismatch(format!(
                "sample {missing:?} is missing from a feature part"
            )));
        }
        lookups.push(map);
    }
    let rows = order
        .iter()
        .map(|id| {
            lookups
                .iter()
                .flat_map(|m| m[id.as_str()].values.iter().copied())
                .collect()
        })
        .collect();
    FeatureMatrix::from_rows(schema, order, rows)
}

/// CSV with header `sample_id,<column names>` and one row per sample.
pub fn write_feature_csv(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "sample_id")?;
    for name in matrix.schema.names() {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for (i, id) in matrix.sample_ids.iter().enumerate() {
        write!(out, "{id}")?;
        for v in matrix.row(i) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

const CACHE_MAGIC: &[u8; 4] = b"FEAT";
const CACHE_VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    schema: FeatureSchema,
    sample_ids: Vec<String>,
    #[serde(default)]
    labels: Option<Vec<u8>>,
}

/// Binary cache: magic "FEAT" | u16 version | u32 header length | JSON
/// header (schema, sample ids, labels) | row-major little-endian f64 values.
pub fn write_feature_cache(
    matrix: &FeatureMatrix,
    labels: Option<&[u8]>,
    path: impl AsRef<Path>,
) -> Result<(), FeatureError> {
    let header = CacheHeader {
        schema: matrix.schema.clone(),
        sample_ids: matrix.sample_ids.clone(),
        labels: labels.map(<[u8]>::to_vec),
    };
    let json = serde_json::to_vec(&header).map_err(|e| FeatureError::BadFile(e.to_string()))?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(CACHE_MAGIC)?;
    out.write_all(&CACHE_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    for v in &matrix.data {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_feature_cache(path: impl AsRef<Path>) -> Result<(FeatureMatrix, Option<Vec<u8>>), FeatureError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |m: &str| FeatureError::BadFile(m.to_string());
    if bytes.len() < 10 || &bytes[..4] != CACHE_MAGIC {
        return Err(bad("not a feature cache (magic \"FEAT\")"));
    }
    if u16::from_le_bytes([bytes[4], bytes[5]]) != CACHE_VERSION {
        return Err(bad("unsupported feature cache version"));
    }
    let hl = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    if bytes.len() < 10 + hl {
        return Err(bad("truncated header"));
    }
    let header: CacheHeader =
        serde_json::from_slice(&bytes[10..10 + hl]).map_err(|e| FeatureError::BadFile(e.to_string()))?;
    // recompute the hash rather than trusting the stored one
    let schema = FeatureSchema::new(header.schema.columns().to_vec())?;
    if schema.hash() != header.schema.hash() {
        return Err(bad("schema hash does not match columns"));
    }
    let payload = &bytes[10 + hl..];
    let expected = header.sample_ids.len() * schema.len() * 8;
    if payload.len() != expected {
        return Err(bad("payload size does not match header"));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if let Some(l) = &header.labels {
        if l.len() != header.sample_ids.len() {
            return Err(bad("label count does not match sample count"));
        }
    }
    Ok((
        FeatureMatrix {
            schema,
            sample_ids: header.sample_ids,
            data,
        },
        header.labels,
    ))
}
