use super::spec::{apply_perturbation, Alignment, PerturbationSpec};
use super::PerturbError;
use crate::data::{AttentionStack, TokenSequence};
use crate::features::{map_concentration, row_kl, FeatureError, FeatureSchema, FeatureVector, KL_FLOOR};
use crate::transformer::{ModelError, TinyTransformer};

/// Anything that maps a token sequence to an attention stack.
pub trait AttentionModel: Sync {
    fn attention(&self, tokens: &TokenSequence) -> Result<AttentionStack, ModelError>;
}

impl AttentionModel for TinyTransformer {
    fn attention(&self, tokens: &TokenSequence) -> Result<AttentionStack, ModelError> {
        Ok(self.forward(tokens)?.attention)
    }
}

/// Attention of a sample and of its perturbed counterpart.
#[derive(Debug, Clone)]
pub struct PerturbedPair {
    original: AttentionStack,
    perturbed: AttentionStack,
    alignment: Alignment,
}

impl PerturbedPair {
    pub fn new(original: AttentionStack, perturbed: AttentionStack, alignment: Alignment) -> Result<Self, PerturbError> {
        if original.layers() != perturbed.layers() || original.heads() != perturbed.heads() {
            return Err(PerturbError::ShapeMismatch(format!(
                "original has L={} H={}, perturbed has L={} H={}",
                original.layers(),
                original.heads(),
                perturbed.layers(),
                perturbed.heads()
            )));
        }
        if alignment.original_len() != original.seq_len() || alignment.perturbed_len() != perturbed.seq_len() {
            return Err(PerturbError::ShapeMismatch(format!(
                "alignment {}→{} does not fit stacks of length {} and {}",
                alignment.original_len(),
                alignment.perturbed_len(),
                original.seq_len(),
                perturbed.seq_len()
            )));
        }
        Ok(Self {
            original,
            perturbed,
            alignment,
        })
    }

    pub fn original(&self) -> &AttentionStack {
        &self.original
    }

    pub fn perturbed(&self) -> &AttentionStack {
        &self.perturbed
    }

    pub fn alignment(&self) -> &Alignment {
        &self.alignment
    }

    pub fn layers(&self) -> usize {
        self.original.layers()
    }

    pub fn heads(&self) -> usize {
        self.original.heads()
    }

    /// Keeps the first `len` original tokens and the perturbed prefix that
    /// holds their images.
    pub fn truncated(&self, len: usize) -> PerturbedPair {
        let len = len.min(self.original.seq_len());
        let alignment = self.alignment.truncated(len);
        let plen = alignment.perturbed_len().max(1);
        PerturbedPair {
            original: self.original.truncated(len),
            perturbed: self.perturbed.truncated(plen),
            alignment: Alignment::new(alignment.images().to_vec(), plen).expect("truncation keeps images valid"),
        }
    }

    fn check(&self, layer: usize, head: usize) -> Result<(usize, usize), PerturbError> {
        if layer == 0 || layer > self.layers() {
            return Err(FeatureError::IndexOutOfRange {
                what: "layer",
                index: layer,
                max: self.layers(),
            }
            .into());
        }
        if head == 0 || head > self.heads() {
            return Err(FeatureError::IndexOutOfRange {
                what: "head",
                index: head,
                max: self.heads(),
            }
            .into());
        }
        Ok((layer - 1, head - 1))
    }
}

fn restricted(row: &[f32], cols: &[usize], renormalize: bool) -> Vec<f64> {
    let mut out: Vec<f64> = cols.iter().map(|&j| row[j] as f64).collect();
    if renormalize {
        let sum: f64 = out.iter().sum();
        if sum > 0.0 {
            out.iter_mut().for_each(|v| *v /= sum);
        } else {
            let u = 1.0 / out.len() as f64;
            out.iter_mut().for_each(|v| *v = u);
        }
    }
    out
}

/// Δκ for head `head` at layer `layer` (1-based): mean over aligned rows of
/// KL(original ‖ perturbed), both rows restricted to aligned columns and
/// renormalized. Rows are used as-is when the alignment is the identity.
pub fn kl_shift(pair: &PerturbedPair, layer: usize, head: usize) -> Result<f64, PerturbError> {
    let (l, h) = pair.check(layer, head)?;
    let aligned: Vec<(usize, usize)> = pair.alignment.pairs().collect();
    if aligned.is_empty() {
        return Err(PerturbError::EmptyAlignment);
    }
    let renormalize = !pair.alignment.is_identity();
    let cols_a: Vec<usize> = aligned.iter().map(|p| p.0).collect();
    let cols_b: Vec<usize> = aligned.iter().map(|p| p.1).collect();
    let a = pair.original.map(l, h);
    let b = pair.perturbed.map(l, h);
    let total: f64 = aligned
        .iter()
        .map(|&(i, ip)| {
            let p = restricted(a.row(i), &cols_a, renormalize);
            let q = restricted(b.row(ip), &cols_b, renormalize);
            row_kl(p, q)
        })
        .sum();
    Ok(total / aligned.len() as f64)
}

/// `(κ′ − κ) / max(κ, 1e-12)` for head `head` at layer `layer` (1-based).
pub fn concentration_delta(pair: &PerturbedPair, layer: usize, head: usize) -> Result<f64, PerturbError> {
    let (l, h) = pair.check(layer, head)?;
    let k = map_concentration(pair.original.map(l, h));
    let kp = map_concentration(pair.perturbed.map(l, h));
    Ok((kp - k) / k.max(KL_FLOOR))
}

/// Feature vector for a list of tagged pairs sharing one original stack,
/// in [`FeatureSchema::perturbation`] order.
pub fn pair_features(
    sample_id: &str,
    pairs: &[(String, PerturbedPair)],
) -> Result<(FeatureSchema, FeatureVector), PerturbError> {
    let first = pairs
        .first()
        .ok_or_else(|| PerturbError::InvalidSpec("no perturbation specs".into()))?;
    let (layers, heads) = (first.1.layers(), first.1.heads());
    let tags: Vec<String> = pairs.iter().map(|(t, _)| t.clone()).collect();
    let schema = FeatureSchema::perturbation(&tags, layers, heads)?;
    let mut values = Vec::with_capacity(schema.len());
    for (_, pair) in pairs {
        if pair.layers() != layers || pair.heads() != heads {
            return Err(PerturbError::ShapeMismatch(format!(
                "sample {sample_id:?}: pairs disagree on L/H"
            )));
        }
        for l in 1..=layers {
            for h in 1..=heads {
                values.push(kl_shift(pair, l, h)?);
            }
        }
        for l in 1..=layers {
            for h in 1..=heads {
                values.push(concentration_delta(pair, l, h)?);
            }
        }
    }
    for (v, c) in values.iter().zip(schema.columns()) {
        if !v.is_finite() {
            return Err(FeatureError::NonFinite {
                sample: sample_id.to_string(),
                column: c.name(),
            }
            .into());
        }
    }
    let vector = FeatureVector {
        sample_id: sample_id.to_string(),
        values,
        schema_hash: schema.hash().to_string(),
    };
    Ok((schema, vector))
}

/// Runs the model on `tokens` and on each perturbation and returns the
/// Δκ and concentration-delta features. Column tags are `s{k}-{kind}`.
pub fn extract_perturbation_features<M: AttentionModel + ?Sized>(
    sample_id: &str,
    tokens: &TokenSequence,
    model: &M,
    specs: &[PerturbationSpec],
) -> Result<(FeatureSchema, FeatureVector), PerturbError> {
    if specs.is_empty() {
        return Err(PerturbError::InvalidSpec("no perturbation specs".into()));
    }
    let original = model.attention(tokens)?;
    let mut pairs = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        let (ptokens, alignment) = apply_perturbation(tokens, spec)?;
        let perturbed = model.attention(&ptokens)?;
        pairs.push((
            format!("s{k}-{}", spec.kind),
            PerturbedPair::new(original.clone(), perturbed, alignment)?,
        ));
    }
    pair_features(sample_id, &pairs)
}
