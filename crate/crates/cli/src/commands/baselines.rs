use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use attenmia_core::baselines::{
    loss_score, min_k_score, ppl_score, ref_score, write_baseline_csv, zlib_score, BaselineMethod, BaselineScore,
    DEFAULT_MIN_K,
};
use attenmia_core::data::{read_logprob_dump, LogProbRecord, SampleLine};
use attenmia_core::metrics::DEFAULT_BINS;
use clap::Args;
use serde_json::json;

use super::{ensure_dir, require_file, score_metrics, ScoreMetrics};
use crate::provenance::{write_json, Provenance};
use crate::CliError;

pub const BASELINE_CSV: &str = "baselines.csv";
pub const BASELINE_REPORT: &str = "baselines.json";

#[derive(Debug, Clone, Args)]
pub struct BaselinesArgs {
    /// LGPD dump of the target model.
    #[arg(long)]
    pub logprobs: PathBuf,
    /// LGPD dump of a reference model on the same samples (enables `ref`).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// JSON-lines samples with `text` (enables `zlib`).
    #[arg(long)]
    pub texts: Option<PathBuf>,
    /// Percentage of lowest-probability tokens for Min-K%.
    #[arg(long, default_value_t = DEFAULT_MIN_K)]
    pub min_k: f64,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub(crate) fn read_texts(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: SampleLine = serde_json::from_str(&line)
            .map_err(|e| CliError::input("BadSampleLine", format!("{}:{}: {e}", path.display(), n + 1)))?;
        if let Some(t) = s.text {
            out.insert(s.id, t);
        }
    }
    Ok(out)
}

/// Every baseline computable for all records, in record order per method.
pub(crate) fn compute_baselines(
    records: &[LogProbRecord],
    reference: Option<&[LogProbRecord]>,
    texts: Option<&BTreeMap<String, String>>,
    min_k: f64,
) -> Result<Vec<BaselineScore>, CliError> {
    let mut out = Vec::new();
    for r in records {
        out.push(loss_score(r)?);
    }
    for r in records {
        out.push(ppl_score(r)?);
    }
    for r in records {
        out.push(min_k_score(r, min_k)?);
    }
    if let Some(texts) = texts {
        for r in records {
            let text = texts
                .get(&r.sample_id)
                .ok_or_else(|| CliError::input("MissingText", format!("no text for sample {:?}", r.sample_id)))?;
            out.push(zlib_score(r, text)?);
        }
    }
    if let Some(reference) = reference {
        let by_id: BTreeMap<&str, &LogProbRecord> = reference.iter().map(|r| (r.sample_id.as_str(), r)).collect();
        for r in records {
            let other = by_id.get(r.sample_id.as_str()).ok_or_else(|| {
                CliError::input("MissingReference", format!("no reference record for {:?}", r.sample_id))
            })?;
            out.push(ref_score(r, other)?);
        }
    }
    Ok(out)
}

/// Per-method metrics over labelled records; `None` when labels are absent
/// or one class is empty.
pub(crate) fn baseline_metrics(
    records: &[LogProbRecord],
    scores: &[BaselineScore],
    bins: usize,
) -> Result<Option<BTreeMap<String, ScoreMetrics>>, CliError> {
    let labels: Option<BTreeMap<&str, u8>> = records
        .iter()
        .map(|r| r.label.map(|l| (r.sample_id.as_str(), l)))
        .collect();
    let Some(labels) = labels else { return Ok(None) };
    let n_pos = labels.values().filter(|&&l| l == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Ok(None);
    }
    let mut by_method: BTreeMap<BaselineMethod, Vec<(f64, u8)>> = BTreeMap::new();
    for s in scores {
        by_method
            .entry(s.method)
            .or_default()
            .push((s.oriented, labels[s.sample_id.as_str()]));
    }
    let mut out = BTreeMap::new();
    for (m, pairs) in by_method {
        out.insert(m.tag().to_string(), score_metrics(&pairs, bins)?);
    }
    Ok(Some(out))
}

pub fn run(args: &BaselinesArgs, seed: u64) -> Result<(), CliError> {
    require_file("logprobs", &args.logprobs)?;
    let records = read_logprob_dump(&args.logprobs)?;
    let reference = args.reference.as_deref().map(read_logprob_dump).transpose()?;
    let texts = args.texts.as_deref().map(read_texts).transpose()?;
    let scores = compute_baselines(&records, reference.as_deref(), texts.as_ref(), args.min_k)?;
    let metrics = baseline_metrics(&records, &scores, args.bins)?;
    ensure_dir(&args.out)?;
    write_baseline_csv(&scores, args.out.join(BASELINE_CSV))?;
    let prov = Provenance::new(
        "baselines",
        seed,
        json!({"min_k": args.min_k, "bins": args.bins}),
    )
    .input("logprobs", &args.logprobs)?
    .input_opt("reference", args.reference.as_deref())?
    .input_opt("texts", args.texts.as_deref())?;
    let report = json!({
        "n_samples": records.len(),
        "methods": metrics,
        "provenance": prov,
    });
    write_json(&args.out.join(BASELINE_REPORT), &report)
}
