use std::path::Path;

use super::{load_weights, Matrix, ModelConfig, ModelError, WeightBundle};
use crate::data::{AttentionStack, TokenSequence};

/// Additive logit for masked (future) positions.
const MASK_LOGIT: f64 = -1e30;

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Causal attention for every layer and head.
    pub attention: AttentionStack,
    /// `ln p(token_t | tokens_<t)` for t = 2..T.
    pub token_logprobs: Vec<f64>,
    /// Final-layernorm hidden states, `T × d_model` row-major.
    pub hidden_final: Vec<f64>,
}

fn layer_norm(x: &[f64], scale: &[f64], bias: &[f64], eps: f64, out: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + eps).sqrt();
    for (((o, &v), &s), &b) in out.iter_mut().zip(x).zip(scale).zip(bias) {
        *o = (v - mean) * inv * s + b;
    }
}

fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044_715 * x * x * x)).tanh())
}

/// Applies `rows × d` → `rows × cols` projection row by row.
fn project(x: &[f64], d: usize, w: &Matrix) -> Vec<f64> {
    let rows = x.len() / d;
    let mut out = vec![0.0; rows * w.cols];
    for r in 0..rows {
        w.left_mul(&x[r * d..(r + 1) * d], &mut out[r * w.cols..(r + 1) * w.cols]);
    }
    out
}

/// Runs the model on one sequence.
pub fn forward(
    config: &ModelConfig,
    weights: &WeightBundle,
    tokens: &TokenSequence,
) -> Result<ForwardOutput, ModelError> {
    let t = tokens.len();
    if t > config.max_positions {
        return Err(ModelError::SequenceTooLong {
            len: t,
            max: config.max_positions,
        });
    }
    tokens.check_vocab(config.vocab_size)?;
    let d = config.d_model;
    let n_heads = config.n_heads;
    let dh = config.head_dim();
    let eps = config.layernorm_epsilon;
    let inv_sqrt_dh = 1.0 / (dh as f64).sqrt();

    let mut hidden = vec![0.0; t * d];
    for (pos, &id) in tokens.tokens().iter().enumerate() {
        let te = weights.tok_emb.row(id as usize);
        let pe = weights.pos_emb.row(pos);
        for ((h, &a), &b) in hidden[pos * d..(pos + 1) * d].iter_mut().zip(te).zip(pe) {
            *h = a + b;
        }
    }

    let mut attention = Vec::with_capacity(config.n_layers * n_heads * t * t);
    let mut normed = vec![0.0; t * d];
    let mut scores = vec![0.0f64; t];
    for lw in &weights.layers {
        for r in 0..t {
            layer_norm(
                &hidden[r * d..(r + 1) * d],
                &lw.ln1_scale,
                &lw.ln1_bias,
                eps,
                &mut normed[r * d..(r + 1) * d],
            );
        }
        let q = project(&normed, d, &lw.w_q);
        let k = project(&normed, d, &lw.w_k);
        let v = project(&normed, d, &lw.w_v);
        let mut context = vec![0.0; t * d];
        for h in 0..n_heads {
            let cols = h * dh..(h + 1) * dh;
            for i in 0..t {
                let qi = &q[i * d + cols.start..i * d + cols.end];
                let mut max = f64::NEG_INFINITY;
                for (j, s) in scores.iter_mut().enumerate() {
                    let kj = &k[j * d + cols.start..j * d + cols.end];
                    let dot: f64 = qi.iter().zip(kj).map(|(a, b)| a * b).sum();
                    *s = dot * inv_sqrt_dh + if j > i { MASK_LOGIT } else { 0.0 };
                    max = max.max(*s);
                }
                let mut sum = 0.0;
                for s in scores.iter_mut() {
                    *s = (*s - max).exp();
                    sum += *s;
                }
                let ctx = &mut context[i * d + cols.start..i * d + cols.end];
                for (j, s) in scores.iter_mut().enumerate() {
                    *s /= sum;
                    if *s != 0.0 {
                        let vj = &v[j * d + cols.start..j * d + cols.end];
                        for (c, &vv) in ctx.iter_mut().zip(vj) {
                            *c += *s * vv;
                        }
                    }
                }
                attention.extend(scores.iter().map(|&p| p as f32));
            }
        }
        let attn_out = project(&context, d, &lw.w_o);
        for (h, a) in hidden.iter_mut().zip(&attn_out) {
            *h += a;
        }

        for r in 0..t {
            layer_norm(
                &hidden[r * d..(r + 1) * d],
                &lw.ln2_scale,
                &lw.ln2_bias,
                eps,
                &mut normed[r * d..(r + 1) * d],
            );
        }
        let mut inner = project(&normed, d, &lw.mlp_w_in);
        let f = config.d_ff;
        for r in 0..t {
            for (x, &b) in inner[r * f..(r + 1) * f].iter_mut().zip(&lw.mlp_b_in) {
                *x = gelu(*x + b);
            }
        }
        let mlp_out = project(&inner, f, &lw.mlp_w_out);
        for r in 0..t {
            for ((h, &m), &b) in hidden[r * d..(r + 1) * d]
                .iter_mut()
                .zip(&mlp_out[r * d..(r + 1) * d])
                .zip(&lw.mlp_b_out)
            {
                *h += m + b;
            }
        }
    }

    let mut hidden_final = vec![0.0; t * d];
    for r in 0..t {
        layer_norm(
            &hidden[r * d..(r + 1) * d],
            &weights.lnf_scale,
            &weights.lnf_bias,
            eps,
            &mut hidden_final[r * d..(r + 1) * d],
        );
    }

    let vocab = config.vocab_size;
    let mut logits = vec![0.0; vocab];
    let mut token_logprobs = Vec::with_capacity(t.saturating_sub(1));
    for pos in 0..t.saturating_sub(1) {
        let x = &hidden_final[pos * d..(pos + 1) * d];
        match &weights.unembed {
            Some(u) => u.left_mul(x, &mut logits),
            None => {
                for (tok, l) in logits.iter_mut().enumerate() {
                    *l = x.iter().zip(weights.tok_emb.row(tok)).map(|(a, b)| a * b).sum();
                }
            }
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        let next = tokens.tokens()[pos + 1] as usize;
        token_logprobs.push((logits[next] - lse).min(0.0));
    }

    let attention = AttentionStack::new(config.n_layers, n_heads, t, true, attention)?;
    Ok(ForwardOutput {
        attention,
        token_logprobs,
        hidden_final,
    })
}

/// A loaded model: configuration plus weights.
#[derive(Debug, Clone)]
pub struct TinyTransformer {
    pub config: ModelConfig,
    pub weights: WeightBundle,
}

impl TinyTransformer {
    pub fn new(config: ModelConfig, weights: WeightBundle) -> Self {
        Self { config, weights }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let (config, weights) = load_weights(path)?;
        Ok(Self { config, weights })
    }

    pub fn forward(&self, tokens: &TokenSequence) -> Result<ForwardOutput, ModelError> {
        forward(&self.config, &self.weights, tokens)
    }
}
