//! Feature extraction over whole dumps: family toggles, layer filter and
//! length truncation applied uniformly to every sample.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{AttentionDump, AttentionStack, DataError};
use crate::features::{
    extract_transitional, map_concentration, FeatureError, FeatureFamily, FeatureMatrix, FeatureSchema, FeatureVector,
    TransitionalOptions,
};
use crate::perturb::{pair_features, pairs_from_dumps, PerturbError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no feature family enabled")]
    NoFamilies,
    #[error("layer {layer} outside 1..={max}")]
    LayerOutOfRange { layer: usize, max: usize },
    #[error("max_len must be at least 1")]
    ZeroLength,
    #[error("perturbation features requested but no perturbed dump given")]
    MissingPerturbedDump,
    #[error("samples produce different schemas ({0})")]
    InconsistentSchema(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub transitional: bool,
    pub perturbation: bool,
    pub concentration: bool,
    /// 1-based layers to keep; a transition column is kept when its lower
    /// layer is listed.
    pub layers: Option<Vec<usize>>,
    /// Keep only the first `max_len` tokens of every sample.
    pub max_len: Option<usize>,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            transitional: true,
            perturbation: true,
            concentration: true,
            layers: None,
            max_len: None,
        }
    }
}

impl FeatureOptions {
    pub fn check(&self, layers: usize) -> Result<(), PipelineError> {
        if !(self.transitional || self.perturbation || self.concentration) {
            return Err(PipelineError::NoFamilies);
        }
        if let Some(filter) = &self.layers {
            if let Some(&bad) = filter.iter().find(|&&l| l == 0 || l > layers) {
                return Err(PipelineError::LayerOutOfRange { layer: bad, max: layers });
            }
        }
        if self.max_len == Some(0) {
            return Err(PipelineError::ZeroLength);
        }
        Ok(())
    }

    fn keeps_layer(&self, layer: usize) -> bool {
        self.layers.as_ref().is_none_or(|f| f.contains(&layer))
    }
}

fn concentration_part(sample_id: &str, stack: &AttentionStack) -> (FeatureSchema, FeatureVector) {
    let (_, schema) = FeatureSchema::transitional(stack.layers(), stack.heads(), true)
        .select(|c| c.family == FeatureFamily::Concentration);
    let mut values = Vec::with_capacity(schema.len());
    for l in 0..stack.layers() {
        for h in 0..stack.heads() {
            values.push(map_concentration(stack.map(l, h)));
        }
    }
    let v = FeatureVector {
        sample_id: sample_id.to_string(),
        values,
        schema_hash: schema.hash().to_string(),
    };
    (schema, v)
}

/// Features of one sample: concentration, transitional and perturbation
/// blocks in that order, filtered by `opts`.
pub fn sample_features(
    original: &AttentionDump,
    perturbed: Option<&AttentionDump>,
    sample_id: &str,
    opts: &FeatureOptions,
) -> Result<(FeatureSchema, FeatureVector), PipelineError> {
    opts.check(original.layers())?;
    let mut stack = original.read(sample_id)?;
    if let Some(n) = opts.max_len {
        stack = stack.truncated(n);
    }
    let mut parts: Vec<(FeatureSchema, FeatureVector)> = Vec::new();
    if opts.concentration {
        parts.push(concentration_part(sample_id, &stack));
    }
    if opts.transitional {
        let v = extract_transitional(
            sample_id,
            &stack,
            TransitionalOptions {
                include_concentration: false,
            },
        )?;
        parts.push((FeatureSchema::transitional(stack.layers(), stack.heads(), false), v));
    }
    if opts.perturbation {
        let pert = perturbed.ok_or(PipelineError::MissingPerturbedDump)?;
        let mut pairs = pairs_from_dumps(original, pert, sample_id)?;
        if let Some(n) = opts.max_len {
            for (_, p) in pairs.iter_mut() {
                *p = p.truncated(n);
            }
        }
        parts.push(pair_features(sample_id, &pairs)?);
    }
    let schema = FeatureSchema::concat(&parts.iter().map(|p| &p.0).collect::<Vec<_>>())?;
    let values: Vec<f64> = parts.into_iter().flat_map(|p| p.1.values).collect();
    let (idx, schema) = schema.select(|c| opts.keeps_layer(c.layer));
    let values = idx.iter().map(|&i| values[i]).collect();
    let vector = FeatureVector {
        sample_id: sample_id.to_string(),
        values,
        schema_hash: schema.hash().to_string(),
    };
    Ok((schema, vector))
}

/// Features and labels for every sample of `original`, in manifest order.
pub fn dump_features(
    original: &AttentionDump,
    perturbed: Option<&AttentionDump>,
    opts: &FeatureOptions,
) -> Result<(FeatureMatrix, Vec<u8>), PipelineError> {
    opts.check(original.layers())?;
    let ids: Vec<&str> = original.entries().iter().map(|e| e.id.as_str()).collect();
    let labels: Vec<u8> = original.entries().iter().map(|e| e.label).collect();
    let rows: Vec<(FeatureSchema, FeatureVector)> = ids
        .par_iter()
        .map(|id| sample_features(original, perturbed, id, opts))
        .collect::<Result<_, _>>()?;
    let schema = match rows.first() {
        Some((s, _)) => s.clone(),
        None => FeatureSchema::new(vec![])?,
    };
    for (s, v) in &rows {
        if s.hash() != schema.hash() {
            return Err(PipelineError::InconsistentSchema(format!(
                "sample {:?} has {} columns, expected {}",
                v.sample_id,
                s.len(),
                schema.len()
            )));
        }
    }
    let matrix = FeatureMatrix::from_rows(
        schema,
        ids.iter().map(|s| s.to_string()).collect(),
        rows.into_iter().map(|(_, v)| v.values).collect(),
    )?;
    Ok((matrix, labels))
}
