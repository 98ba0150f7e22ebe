use rand::Rng;

use super::ClassifierError;
use crate::data::hash64_hex;
use crate::features::{FeatureMatrix, FeatureSchema, FeatureVector};

/// Per-feature centering and scaling fitted on a training fold.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Population mean and standard deviation; zero-variance columns get
    /// std 1.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Self {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in &rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Fully connected network with ReLU hidden layers and a single logistic
/// output. Parameters are stored flat, per layer `W[out][in]` then `b[out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
    norm: Standardizer,
    feature_names: Vec<String>,
    schema_hash: String,
    seed: u64,
}

fn param_len(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn names_hash(names: &[String]) -> String {
    hash64_hex(names.join("\n").as_bytes())
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of logit `z` against label `y`.
fn bce(z: f64, y: f64) -> f64 {
    softplus(z) - y * z
}

impl MlpModel {
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        params: Vec<f64>,
        norm: Standardizer,
        feature_names: Vec<String>,
        seed: u64,
    ) -> Result<Self, ClassifierError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) || *layer_sizes.last().unwrap() != 1 {
            return Err(ClassifierError::BadModel(format!("layer sizes {layer_sizes:?}")));
        }
        if params.len() != param_len(&layer_sizes) {
            return Err(ClassifierError::BadModel(format!(
                "{} parameters for layer sizes {layer_sizes:?}",
                params.len()
            )));
        }
        let d = layer_sizes[0];
        if norm.mean.len() != d || norm.std.len() != d || feature_names.len() != d {
            return Err(ClassifierError::BadModel("normalization or names do not match input width".into()));
        }
        if norm.std.iter().any(|s| !(*s > 0.0)) {
            return Err(ClassifierError::BadModel("non-positive standard deviation".into()));
        }
        let schema_hash = names_hash(&feature_names);
        Ok(Self {
            layer_sizes,
            params,
            norm,
            feature_names,
            schema_hash,
            seed,
        })
    }

    /// Weights drawn from U(±√(6/fan_in)), biases zero.
    pub fn init<R: Rng>(
        schema: &FeatureSchema,
        hidden: &[usize],
        norm: Standardizer,
        seed: u64,
        rng: &mut R,
    ) -> Result<Self, ClassifierError> {
        let names = schema.names();
        Self::init_named(names, hidden, norm, seed, rng)
    }

    pub(crate) fn init_named<R: Rng>(
        feature_names: Vec<String>,
        hidden: &[usize],
        norm: Standardizer,
        seed: u64,
        rng: &mut R,
    ) -> Result<Self, ClassifierError> {
        let mut sizes = vec![feature_names.len()];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut params = Vec::with_capacity(param_len(&sizes));
        for w in sizes.windows(2) {
            let bound = (6.0 / w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                params.push(rng.gen_range(-bound..bound));
            }
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Self::from_parts(sizes, params, norm, feature_names, seed)
    }

    /// Random model with generic feature names `x1..xd` and identity
    /// normalization.
    pub fn random<R: Rng>(input: usize, hidden: &[usize], rng: &mut R) -> Self {
        let names = (1..=input).map(|i| format!("x{i}")).collect();
        Self::init_named(names, hidden, Standardizer::identity(input), 0, rng).expect("valid sizes")
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn set_params(&mut self, params: &[f64]) {
        self.params.copy_from_slice(params);
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.norm
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn schema_hash(&self) -> &str {
        &self.schema_hash
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Activations of every layer for an already standardized input; the
    /// last entry holds the output logit.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let mut off = 0;
        let n_layers = self.layer_sizes.len() - 1;
        for k in 0..n_layers {
            let (din, dout) = (self.layer_sizes[k], self.layer_sizes[k + 1]);
            let w = &self.params[off..off + din * dout];
            let b = &self.params[off + din * dout..off + din * dout + dout];
            let a = acts.last().unwrap();
            let mut z: Vec<f64> = (0..dout)
                .map(|o| b[o] + w[o * din..(o + 1) * din].iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>())
                .collect();
            if k + 1 < n_layers {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
            off += din * dout + dout;
        }
        acts
    }

    fn logit_std(&self, x: &[f64]) -> f64 {
        self.activations(x).last().unwrap()[0]
    }

    /// Output logit for raw (unstandardized) features.
    pub fn logit(&self, raw: &[f64]) -> f64 {
        assert_eq!(raw.len(), self.input_dim(), "feature width");
        self.logit_std(&self.norm.apply(raw))
    }

    /// Membership probability for raw features, kept inside (0, 1).
    pub fn probability(&self, raw: &[f64]) -> f64 {
        sigmoid(self.logit(raw)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
    }

    /// Summed BCE loss over standardized samples and, when `grad` is given,
    /// accumulates its parameter gradient.
    pub(crate) fn loss_std(&self, samples: &[(&[f64], f64)], mut grad: Option<&mut [f64]>) -> f64 {
        let n_layers = self.layer_sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for k in 0..n_layers {
            offsets.push(off);
            off += self.layer_sizes[k] * self.layer_sizes[k + 1] + self.layer_sizes[k + 1];
        }
        let mut total = 0.0;
        for &(x, y) in samples {
            let acts = self.activations(x);
            let z = acts[n_layers][0];
            total += bce(z, y);
            let Some(g) = grad.as_deref_mut() else { continue };
            let mut delta = vec![sigmoid(z) - y];
            for k in (0..n_layers).rev() {
                let (din, dout) = (self.layer_sizes[k], self.layer_sizes[k + 1]);
                let o0 = offsets[k];
                let a = &acts[k];
                for o in 0..dout {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut g[o0 + o * din..o0 + (o + 1) * din];
                    for (gi, ai) in row.iter_mut().zip(a) {
                        *gi += d * ai;
                    }
                    g[o0 + din * dout + o] += d;
                }
                if k > 0 {
                    let w = &self.params[o0..o0 + din * dout];
                    delta = (0..din)
                        .map(|i| {
                            if a[i] > 0.0 {
                                (0..dout).map(|o| w[o * din + i] * delta[o]).sum()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
            }
        }
        total
    }
}

fn check_hash(model: &MlpModel, found: &str) -> Result<(), ClassifierError> {
    if found != model.schema_hash {
        return Err(ClassifierError::SchemaMismatch {
            expected: model.schema_hash.clone(),
            found: found.to_string(),
        });
    }
    Ok(())
}

/// Membership probability for one feature vector.
pub fn predict(model: &MlpModel, features: &FeatureVector) -> Result<f64, ClassifierError> {
    check_hash(model, &features.schema_hash)?;
    Ok(model.probability(&features.values))
}

/// Membership probabilities for every row of `matrix`.
pub fn predict_batch(model: &MlpModel, matrix: &FeatureMatrix) -> Result<Vec<f64>, ClassifierError> {
    check_hash(model, matrix.schema.hash())?;
    Ok(matrix.rows().map(|r| model.probability(r)).collect())
}

/// Summed BCE loss and its parameter gradient over raw samples.
pub fn loss_gradient(model: &MlpModel, samples: &[(Vec<f64>, u8)]) -> (f64, Vec<f64>) {
    let std: Vec<(Vec<f64>, f64)> = samples
        .iter()
        .map(|(x, y)| (model.norm.apply(x), *y as f64))
        .collect();
    let refs: Vec<(&[f64], f64)> = std.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
    let mut grad = vec![0.0; model.params.len()];
    let loss = model.loss_std(&refs, Some(&mut grad));
    (loss, grad)
}

/// Largest relative error between analytic gradients and central finite
/// differences (step 1e-5), with relative error
/// `|a − n| / max(|a| + |n|, 1e-6)`.
pub fn gradient_check(model: &MlpModel, features: &[f64], label: u8) -> f64 {
    const STEP: f64 = 1e-5;
    let x = model.norm.apply(features);
    let y = label as f64;
    let sample = [(x.as_slice(), y)];
    let mut grad = vec![0.0; model.params.len()];
    model.loss_std(&sample, Some(&mut grad));
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (k, &a) in grad.iter().enumerate() {
        let orig = probe.params[k];
        probe.params_mut()[k] = orig + STEP;
        let up = probe.loss_std(&sample, None);
        probe.params_mut()[k] = orig - STEP;
        let down = probe.loss_std(&sample, None);
        probe.params_mut()[k] = orig;
        let n = (up - down) / (2.0 * STEP);
        let rel = (a - n).abs() / (a.abs() + n.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}
