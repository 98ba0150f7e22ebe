use std::path::PathBuf;

use rayon::prelude::*;

use super::{ModelError, TinyTransformer};
use crate::data::{write_attention_dump, write_logprob_dump, DumpEntry, LabeledSample, LogProbRecord};

/// Output paths for [`dump_attention`].
#[derive(Debug, Clone)]
pub struct DumpTargets {
    pub attention: PathBuf,
    pub logprobs: Option<PathBuf>,
}

/// Runs the model on every sample and writes an ATND dump (plus an LGPD dump
/// when requested). Samples are processed in parallel; output order follows
/// the input order.
pub fn dump_attention(
    model: &TinyTransformer,
    samples: &[LabeledSample],
    model_tag: &str,
    targets: &DumpTargets,
) -> Result<(), ModelError> {
    let outputs = samples
        .par_iter()
        .map(|s| model.forward(&s.sequence))
        .collect::<Result<Vec<_>, _>>()?;
    let mut entries = Vec::with_capacity(samples.len());
    let mut records = Vec::with_capacity(samples.len());
    for (s, out) in samples.iter().zip(outputs) {
        records.push(
            LogProbRecord::new(
                s.sample_id.clone(),
                out.token_logprobs.iter().map(|&l| l as f32).collect(),
                model_tag,
            )
            .with_label(s.label),
        );
        entries.push(DumpEntry::new(s.sample_id.clone(), out.attention, s.label).with_group(s.group.clone()));
    }
    write_attention_dump(&entries, model_tag, &targets.attention)?;
    if let Some(p) = &targets.logprobs {
        write_logprob_dump(&records, p)?;
    }
    Ok(())
}
