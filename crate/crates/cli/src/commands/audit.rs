use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use attenmia_core::classifier::{
    cv_scores, permute_labels, save_model, train_cv, train_full, write_scores_csv, TrainConfig,
};
use attenmia_core::data::read_logprob_dump;
use attenmia_core::features::{write_feature_cache, FeatureMatrix};
use attenmia_core::metrics::{hellinger, roc_curve, ScoreSet, DEFAULT_BINS};
use clap::Args;
use serde::Serialize;
use serde_json::json;

use super::baselines::{baseline_metrics, compute_baselines};
use super::features::{extract, feature_provenance};
use super::{ensure_dir, mean_std, require_file, score_metrics, ScoreMetrics};
use crate::provenance::write_json;
use crate::{CliError, FeatureArgs, TrainArgs};

pub const AUDIT_REPORT: &str = "report.json";
pub const AUDIT_ROC: &str = "roc.csv";
pub const AUDIT_HELLINGER: &str = "hellinger.csv";
pub const AUDIT_FEATURES: &str = "features.feat";
pub const AUDIT_SCORES: &str = "scores.csv";
pub const AUDIT_MODEL: &str = "model.mlpm";

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// LGPD dump; adds output-based baselines to the report.
    #[arg(long)]
    pub logprobs: Option<PathBuf>,
    /// Min-K% percentage for the baseline.
    #[arg(long, default_value_t = attenmia_core::baselines::DEFAULT_MIN_K)]
    pub min_k: f64,
    /// Shuffle labels with the seed before training (null control).
    #[arg(long)]
    pub permute_labels: bool,
    /// Histogram bins for Hellinger distances.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_test: usize,
    pub auc: f64,
    pub tpr_at_1pct_fpr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HellingerRow {
    pub feature: String,
    pub family: String,
    pub tag: Option<String>,
    pub layer: usize,
    pub head: usize,
    pub hellinger: f64,
    pub member_mean: f64,
    pub nonmember_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupMeans {
    pub family: String,
    pub tag: String,
    pub member_mean: f64,
    pub nonmember_mean: f64,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub(crate) fn hellinger_rows(matrix: &FeatureMatrix, labels: &[u8], bins: usize) -> Result<Vec<HellingerRow>, CliError> {
    let mut rows = Vec::with_capacity(matrix.n_cols());
    for (j, c) in matrix.schema.columns().iter().enumerate() {
        let col = matrix.column(j);
        let mem: Vec<f64> = col.iter().zip(labels).filter(|p| *p.1 == 1).map(|p| *p.0).collect();
        let non: Vec<f64> = col.iter().zip(labels).filter(|p| *p.1 != 1).map(|p| *p.0).collect();
        rows.push(HellingerRow {
            feature: c.name(),
            family: c.family.as_str().to_string(),
            tag: c.perturbation_tag.clone(),
            layer: c.layer,
            head: c.head,
            hellinger: hellinger(&mem, &non, bins)?,
            member_mean: mean(&mem),
            nonmember_mean: mean(&non),
        });
    }
    Ok(rows)
}

fn group_means(matrix: &FeatureMatrix, labels: &[u8]) -> Vec<GroupMeans> {
    let mut groups: BTreeMap<(String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (j, c) in matrix.schema.columns().iter().enumerate() {
        let Some(tag) = &c.perturbation_tag else { continue };
        let g = groups.entry((c.family.as_str().to_string(), tag.clone())).or_default();
        for (i, &l) in labels.iter().enumerate() {
            let v = matrix.row(i)[j];
            if l == 1 {
                g.0.push(v);
            } else {
                g.1.push(v);
            }
        }
    }
    groups
        .into_iter()
        .map(|((family, tag), (m, n))| GroupMeans {
            family,
            tag,
            member_mean: mean(&m),
            nonmember_mean: mean(&n),
        })
        .collect()
}

fn hellinger_csv(rows: &[HellingerRow]) -> String {
    let mut s = String::from("feature,family,tag,layer,head,hellinger,member_mean,nonmember_mean\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.feature,
            r.family,
            r.tag.as_deref().unwrap_or(""),
            r.layer,
            r.head,
            r.hellinger,
            r.member_mean,
            r.nonmember_mean
        );
    }
    s
}

/// Highest-HD feature per family.
fn best_per_family(rows: &[HellingerRow]) -> BTreeMap<String, &HellingerRow> {
    let mut best: BTreeMap<String, &HellingerRow> = BTreeMap::new();
    for r in rows {
        match best.get(&r.family) {
            Some(b) if b.hellinger >= r.hellinger => {}
            _ => {
                best.insert(r.family.clone(), r);
            }
        }
    }
    best
}

/// Mean Hellinger distance over the columns of each family.
fn mean_per_family(rows: &[HellingerRow]) -> BTreeMap<String, f64> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.family.clone()).or_default().push(r.hellinger);
    }
    groups.into_iter().map(|(f, v)| (f, mean(&v))).collect()
}

pub fn run(args: &AuditArgs, seed: u64) -> Result<(), CliError> {
    let config: TrainConfig = args.train.config(seed);
    config.validate()?;
    if let Some(p) = &args.logprobs {
        require_file("logprobs", p)?;
    }
    let (matrix, true_labels) = extract(&args.features)?;
    let labels = if args.permute_labels {
        permute_labels(&true_labels, seed)
    } else {
        true_labels
    };

    let folds = train_cv(&matrix, &labels, &config)?;
    let mut fold_reports = Vec::with_capacity(folds.len());
    for f in &folds {
        let pairs: Vec<(f64, u8)> = f.scores.iter().zip(&f.test_indices).map(|(&s, &i)| (s, labels[i])).collect();
        let m = score_metrics(&pairs, args.bins)?;
        fold_reports.push(FoldReport {
            fold: f.fold,
            n_test: pairs.len(),
            auc: m.auc,
            tpr_at_1pct_fpr: m.tpr_at_1pct_fpr,
        });
    }
    let (auc_mean, auc_std) = mean_std(&fold_reports.iter().map(|f| f.auc).collect::<Vec<_>>());
    let (tpr_mean, tpr_std) = mean_std(&fold_reports.iter().map(|f| f.tpr_at_1pct_fpr).collect::<Vec<_>>());
    let scores = cv_scores(&folds, &matrix, &labels);
    let pooled_pairs: Vec<(f64, u8)> = scores.iter().map(|s| (s.score, s.label)).collect();
    let pooled: ScoreMetrics = score_metrics(&pooled_pairs, args.bins)?;
    let roc = roc_curve(&ScoreSet::new(pooled_pairs)?)?;

    let hd_rows = hellinger_rows(&matrix, &labels, args.bins)?;
    let best = best_per_family(&hd_rows);
    let groups = group_means(&matrix, &labels);

    let baselines = match &args.logprobs {
        Some(p) => {
            let mut records = read_logprob_dump(p)?;
            let by_id: BTreeMap<&str, u8> = matrix.sample_ids.iter().map(String::as_str).zip(labels.iter().copied()).collect();
            records.retain(|r| by_id.contains_key(r.sample_id.as_str()));
            for r in records.iter_mut() {
                r.label = Some(by_id[r.sample_id.as_str()]);
            }
            let scores = compute_baselines(&records, None, None, args.min_k)?;
            baseline_metrics(&records, &scores, args.bins)?
        }
        None => None,
    };

    let model = train_full(&matrix, &labels, &config)?;

    ensure_dir(&args.out)?;
    write_feature_cache(&matrix, Some(&labels), args.out.join(AUDIT_FEATURES))?;
    write_scores_csv(&scores, args.out.join(AUDIT_SCORES))?;
    save_model(&model, args.out.join(AUDIT_MODEL))?;
    std::fs::write(args.out.join(AUDIT_ROC), roc.to_csv())?;
    std::fs::write(args.out.join(AUDIT_HELLINGER), hellinger_csv(&hd_rows))?;

    let prov = feature_provenance(
        "audit",
        &args.features,
        seed,
        json!({
            "features": args.features.options(),
            "train": config,
            "permute_labels": args.permute_labels,
            "bins": args.bins,
            "min_k": args.min_k,
        }),
    )?
    .input_opt("logprobs", args.logprobs.as_deref())?;
    let report = json!({
        "n_samples": matrix.n_rows(),
        "n_members": labels.iter().filter(|&&l| l == 1).count(),
        "n_features": matrix.n_cols(),
        "schema_hash": matrix.schema.hash(),
        "folds": fold_reports,
        "auc_mean": auc_mean,
        "auc_std": auc_std,
        "tpr_at_1pct_fpr_mean": tpr_mean,
        "tpr_at_1pct_fpr_std": tpr_std,
        "pooled": pooled,
        "hellinger_best": best,
        "hellinger_mean": mean_per_family(&hd_rows),
        "perturbation_groups": groups,
        "baselines": baselines,
        "provenance": prov,
    });
    write_json(&args.out.join(AUDIT_REPORT), &report)
}
