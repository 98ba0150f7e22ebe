use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::plan::PerturbationPlan;
use super::shift::{AttentionModel, PerturbedPair};
use super::spec::{apply_perturbation, Alignment, PerturbationKind};
use super::PerturbError;
use crate::data::{write_attention_dump, AttentionDump, DumpEntry, LabeledSample, TokenSequence};

/// Id of the perturbed dump entry for spec `k` (0-based) of `sample_id`.
pub fn perturbed_id(sample_id: &str, k: usize) -> String {
    format!("{sample_id}#{k}")
}

/// Group-field encoding `kind=<kind>;align=<i'_1>,...`: 1-based images of
/// the original positions, 0 for dropped tokens.
pub fn encode_alignment(kind: PerturbationKind, alignment: &Alignment) -> String {
    let images: Vec<String> = alignment
        .images()
        .iter()
        .map(|img| img.map_or(0, |p| p + 1).to_string())
        .collect();
    format!("kind={kind};align={}", images.join(","))
}

pub fn decode_alignment(group: &str, perturbed_len: usize) -> Result<(PerturbationKind, Alignment), PerturbError> {
    let bad = || PerturbError::InvalidSpec(format!("malformed alignment group {group:?}"));
    let mut kind = None;
    let mut images = None;
    for part in group.split(';') {
        match part.split_once('=') {
            Some(("kind", v)) => kind = Some(v.parse::<PerturbationKind>()?),
            Some(("align", v)) => {
                let parsed: Result<Vec<Option<usize>>, _> = v
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<usize>().map(|p| p.checked_sub(1)))
                    .collect();
                images = Some(parsed.map_err(|_| bad())?);
            }
            _ => return Err(bad()),
        }
    }
    let kind = kind.ok_or_else(bad)?;
    let images = images.ok_or_else(bad)?;
    Ok((kind, Alignment::new(images, perturbed_len)?))
}

/// Runs `model` on every (sample, spec) perturbation and writes one ATND
/// with entries keyed [`perturbed_id`] and the alignment in the group field.
pub fn dump_perturbed<M: AttentionModel + ?Sized>(
    model: &M,
    samples: &[LabeledSample],
    plan: &PerturbationPlan,
    vocab_size: usize,
    prefixes: &BTreeMap<String, TokenSequence>,
    model_tag: &str,
    path: &Path,
) -> Result<(), PerturbError> {
    plan.check()?;
    let per_sample: Vec<Vec<DumpEntry>> = samples
        .par_iter()
        .map(|s| {
            let specs = plan.resolve(s.sequence.len(), vocab_size, prefixes)?;
            specs
                .iter()
                .enumerate()
                .map(|(k, spec)| {
                    let (ptokens, alignment) = apply_perturbation(&s.sequence, spec)?;
                    let stack = model.attention(&ptokens)?;
                    Ok(DumpEntry::new(perturbed_id(&s.sample_id, k), stack, s.label)
                        .with_group(Some(encode_alignment(spec.kind, &alignment))))
                })
                .collect::<Result<Vec<_>, PerturbError>>()
        })
        .collect::<Result<_, _>>()?;
    let entries: Vec<DumpEntry> = per_sample.into_iter().flatten().collect();
    write_attention_dump(&entries, model_tag, path)?;
    Ok(())
}

/// Tagged pairs for `sample_id`, taking entries `sample_id#0`, `#1`, ...
/// from `perturbed` until the first missing index.
pub fn pairs_from_dumps(
    original: &AttentionDump,
    perturbed: &AttentionDump,
    sample_id: &str,
) -> Result<Vec<(String, PerturbedPair)>, PerturbError> {
    let base = original.read(sample_id)?;
    let mut pairs = Vec::new();
    for k in 0.. {
        let id = perturbed_id(sample_id, k);
        if !perturbed.contains(&id) {
            break;
        }
        let entry = perturbed.entry(&id).expect("checked above");
        let group = entry
            .group
            .as_deref()
            .ok_or_else(|| PerturbError::InvalidSpec(format!("{id}: missing alignment group")))?;
        let stack = perturbed.read(&id)?;
        let (kind, alignment) = decode_alignment(group, stack.seq_len())?;
        pairs.push((format!("s{k}-{kind}"), PerturbedPair::new(base.clone(), stack, alignment)?));
    }
    if pairs.is_empty() {
        return Err(PerturbError::MissingPerturbed(sample_id.to_string()));
    }
    Ok(pairs)
}
