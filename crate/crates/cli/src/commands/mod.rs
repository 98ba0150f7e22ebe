pub mod audit;
pub mod baselines;
pub mod features;
pub mod infer;
pub mod masking;
pub mod rank;
pub mod synth;

use std::path::Path;

use crate::CliError;

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub(crate) fn require_file(role: &str, path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::input("MissingInput", format!("{role} file {} does not exist", path.display())))
    }
}

/// AUC, TPR at 1% FPR and member/non-member Hellinger distance of one score.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ScoreMetrics {
    pub auc: f64,
    pub tpr_at_1pct_fpr: f64,
    pub hellinger: f64,
}

pub const FPR_CAP: f64 = 0.01;

/// `scores` are oriented so that higher is more member-like.
pub(crate) fn score_metrics(scores: &[(f64, u8)], bins: usize) -> Result<ScoreMetrics, CliError> {
    use attenmia_core::metrics::{hellinger, roc_auc, tpr_at_fpr, ScoreSet};
    let set = ScoreSet::new(scores.to_vec())?;
    let members: Vec<f64> = scores.iter().filter(|s| s.1 == 1).map(|s| s.0).collect();
    let nonmembers: Vec<f64> = scores.iter().filter(|s| s.1 != 1).map(|s| s.0).collect();
    Ok(ScoreMetrics {
        auc: roc_auc(&set)?,
        tpr_at_1pct_fpr: tpr_at_fpr(&set, FPR_CAP)?,
        hellinger: hellinger(&members, &nonmembers, bins)?,
    })
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}
