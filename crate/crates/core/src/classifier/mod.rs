//! Membership classifier: a small ReLU MLP trained with Adam on
//! standardized features under stratified k-fold cross-validation.

mod io;
mod mlp;
mod train;

pub use io::{load_model, save_model, write_scores_csv, MLPM_MAGIC};
pub use mlp::{gradient_check, loss_gradient, predict, predict_batch, MlpModel, Standardizer};
pub use train::{cv_scores, permute_labels, stratified_folds, train_cv, train_full, CvScore, FoldResult, TrainConfig};

use thiserror::Error;

use crate::data::DataError;
use crate::features::FeatureError;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("fold {fold} has a single-class training set")]
    SingleClassFold { fold: usize },
    #[error("non-finite loss in fold {fold} at epoch {epoch}")]
    NonFiniteLoss { fold: usize, epoch: usize },
    #[error("schema mismatch: model expects {expected}, features carry {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("{labels} labels for {rows} feature rows")]
    LabelCount { labels: usize, rows: usize },
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("bad model file: {0}")]
    BadModel(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Data(#[from] DataError),
}
