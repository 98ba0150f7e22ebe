use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::{MlpModel, Standardizer};
use super::ClassifierError;
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub folds: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub patience: usize,
    pub validation_fraction: f64,
    /// Hidden layer widths; empty gives a logistic-regression model.
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            max_epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            patience: 20,
            validation_fraction: 0.1,
            hidden: vec![64, 32],
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// `max_epochs = 0` is accepted and leaves the initialization in place.
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidConfig(m.to_string()));
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if self.batch_size == 0 || self.patience == 0 {
            return bad("batch_size and patience must be positive");
        }
        if !(self.learning_rate > 0.0 && self.eps > 0.0) {
            return bad("learning_rate and eps must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }
}

/// One cross-validation fold: held-out samples, their scores and the model
/// that produced them.
#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub test_indices: Vec<usize>,
    pub test_ids: Vec<String>,
    pub scores: Vec<f64>,
    pub model: MlpModel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvScore {
    pub sample_id: String,
    pub fold: usize,
    pub score: f64,
    pub label: u8,
}

fn check_labels(matrix: &FeatureMatrix, labels: &[u8]) -> Result<(), ClassifierError> {
    if labels.len() != matrix.n_rows() {
        return Err(ClassifierError::LabelCount {
            labels: labels.len(),
            rows: matrix.n_rows(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(ClassifierError::InvalidLabel(bad));
    }
    Ok(())
}

/// Fold index per sample. Each class is shuffled with the seeded RNG and
/// dealt round-robin; negatives continue where positives stopped so fold
/// sizes stay balanced.
pub fn stratified_folds(labels: &[u8], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 1).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut assign = vec![0; labels.len()];
    for (k, &i) in pos.iter().chain(&neg).enumerate() {
        assign[i] = k % folds;
    }
    assign
}

/// Labels shuffled with a seeded RNG, for permutation-null controls.
pub fn permute_labels(labels: &[u8], seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut out = labels.to_vec();
    out.shuffle(&mut rng);
    out
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for k in 0..params.len() {
            let g = grad[k];
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * g;
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * g * g;
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            params[k] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.eps);
        }
    }
}

/// Trains on `rows` with early stopping on a held-out validation split and
/// returns the best-validation model.
fn fit(
    matrix: &FeatureMatrix,
    rows: &[usize],
    labels: &[u8],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    fold: usize,
) -> Result<MlpModel, ClassifierError> {
    let norm = Standardizer::fit(rows.iter().map(|&i| matrix.row(i)), matrix.n_cols());
    let mut model = MlpModel::init(&matrix.schema, &cfg.hidden, norm, cfg.seed, rng)?;
    let data: Vec<(Vec<f64>, f64)> = rows
        .iter()
        .map(|&i| (model.standardizer().apply(matrix.row(i)), labels[i] as f64))
        .collect();

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let n_val = ((data.len() as f64 * cfg.validation_fraction).round() as usize).clamp(1, data.len().saturating_sub(1).max(1));
    let (val_idx, train_idx) = order.split_at(n_val.min(order.len()));
    let val: Vec<(&[f64], f64)> = val_idx.iter().map(|&k| (data[k].0.as_slice(), data[k].1)).collect();
    let mut train_idx = train_idx.to_vec();
    if train_idx.is_empty() {
        train_idx = val_idx.to_vec();
    }

    let mut best_params = model.params().to_vec();
    let mut best_loss = model.loss_std(&val, None);
    let mut since_best = 0;
    let mut adam = Adam::new(best_params.len());
    let mut grad = vec![0.0; best_params.len()];
    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(rng);
        for chunk in train_idx.chunks(cfg.batch_size) {
            let batch: Vec<(&[f64], f64)> = chunk.iter().map(|&k| (data[k].0.as_slice(), data[k].1)).collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = model.loss_std(&batch, Some(&mut grad));
            if !loss.is_finite() {
                return Err(ClassifierError::NonFiniteLoss { fold, epoch });
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(model.params_mut(), &grad, cfg);
        }
        let val_loss = model.loss_std(&val, None);
        if !val_loss.is_finite() {
            return Err(ClassifierError::NonFiniteLoss { fold, epoch });
        }
        if val_loss < best_loss {
            best_loss = val_loss;
            best_params.copy_from_slice(model.params());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    model.set_params(&best_params);
    Ok(model)
}

/// Stratified k-fold training. Folds run in parallel; fold `k` draws from
/// its own RNG seeded with `seed + k`, so results do not depend on
/// scheduling.
pub fn train_cv(matrix: &FeatureMatrix, labels: &[u8], config: &TrainConfig) -> Result<Vec<FoldResult>, ClassifierError> {
    config.validate()?;
    check_labels(matrix, labels)?;
    let assign = stratified_folds(labels, config.folds, config.seed);
    for fold in 0..config.folds {
        let train: Vec<u8> = (0..labels.len()).filter(|&i| assign[i] != fold).map(|i| labels[i]).collect();
        if !train.contains(&0) || !train.contains(&1) || !assign.contains(&fold) {
            return Err(ClassifierError::SingleClassFold { fold });
        }
    }
    (0..config.folds)
        .into_par_iter()
        .map(|fold| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(fold as u64));
            let train: Vec<usize> = (0..labels.len()).filter(|&i| assign[i] != fold).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|&i| assign[i] == fold).collect();
            let model = fit(matrix, &train, labels, config, &mut rng, fold)?;
            let scores = test.iter().map(|&i| model.probability(matrix.row(i))).collect();
            Ok(FoldResult {
                fold,
                test_ids: test.iter().map(|&i| matrix.sample_ids[i].clone()).collect(),
                test_indices: test,
                scores,
                model,
            })
        })
        .collect()
}

/// Model trained on every sample, for scoring new data after evaluation.
pub fn train_full(matrix: &FeatureMatrix, labels: &[u8], config: &TrainConfig) -> Result<MlpModel, ClassifierError> {
    config.validate()?;
    check_labels(matrix, labels)?;
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(ClassifierError::SingleClassFold { fold: config.folds });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(config.folds as u64));
    let rows: Vec<usize> = (0..labels.len()).collect();
    fit(matrix, &rows, labels, config, &mut rng, config.folds)
}

/// Out-of-fold scores in matrix row order.
pub fn cv_scores(results: &[FoldResult], matrix: &FeatureMatrix, labels: &[u8]) -> Vec<CvScore> {
    let mut out: Vec<Option<CvScore>> = vec![None; matrix.n_rows()];
    for r in results {
        for (&i, &score) in r.test_indices.iter().zip(&r.scores) {
            out[i] = Some(CvScore {
                sample_id: matrix.sample_ids[i].clone(),
                fold: r.fold,
                score,
                label: labels[i],
            });
        }
    }
    out.into_iter().map(|s| s.expect("folds partition the samples")).collect()
}
