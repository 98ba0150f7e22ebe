//! Evaluation statistics for membership scores and extraction rankings.

mod distribution;
mod pca;
mod roc;
mod rouge;

pub use distribution::{hellinger, histogram_pair, pearson, HistogramBin, DEFAULT_BINS};
pub use pca::{pca2, Pca2};
pub use roc::{roc_auc, roc_curve, tpr_at_fpr, RocCurve, RocPoint, ScoreSet};
pub use rouge::{lcs_len, rouge_l, rouge_l_text, RougeScore};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("need at least one positive and one negative, got {n_pos} and {n_neg}")]
    DegenerateClasses { n_pos: usize, n_neg: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite score")]
    NonFinite,
    #[error("PCA needs at least 3 vectors, got {0}")]
    TooFewVectors(usize),
    #[error("vectors have inconsistent dimensions")]
    DimensionMismatch,
}
