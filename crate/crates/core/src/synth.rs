//! Seeded synthetic audit data. Members get sharp attention whose logits are
//! shared across layers and barely move under perturbation; non-members get
//! flatter attention redrawn per layer and heavily disturbed by
//! perturbation, including fresh logits for replaced tokens. Token log-probs are drawn slightly higher for members.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    write_attention_dump, write_logprob_dump, AttentionStack, DataError, DumpEntry, LogProbRecord, TokenSequence,
};
use crate::perturb::{apply_perturbation, encode_alignment, perturbed_id, PerturbError, PerturbationKind, PerturbationPlan};

pub const SYNTH_MODEL_TAG: &str = "synthetic";
pub const SYNTH_PREFIX_ID: &str = "synthetic-prefix";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Generator knobs. Temperatures are drawn per sample from the given
/// ranges; noise scales are in logit units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_members: usize,
    pub n_nonmembers: usize,
    pub layers: usize,
    pub heads: usize,
    pub seq_len: usize,
    pub seed: u64,
    pub vocab_size: usize,
    pub prefix_len: usize,
    pub member_temperature: (f64, f64),
    pub nonmember_temperature: (f64, f64),
    pub member_layer_noise: f64,
    pub member_perturb_noise: f64,
    pub nonmember_perturb_noise: f64,
    pub member_logprob_mu: f64,
    pub nonmember_logprob_mu: f64,
    pub logprob_sigma: f64,
}

impl SynthConfig {
    pub fn new(n_members: usize, n_nonmembers: usize, layers: usize, heads: usize, seq_len: usize, seed: u64) -> Self {
        Self {
            n_members,
            n_nonmembers,
            layers,
            heads,
            seq_len,
            seed,
            vocab_size: 1000,
            prefix_len: 4,
            member_temperature: (0.25, 0.5),
            nonmember_temperature: (0.8, 1.6),
            member_layer_noise: 0.3,
            member_perturb_noise: 0.1,
            nonmember_perturb_noise: 1.0,
            member_logprob_mu: 2.0f64.ln(),
            nonmember_logprob_mu: 2.3f64.ln(),
            logprob_sigma: 0.6,
        }
    }

    fn check(&self) -> Result<(), SynthError> {
        if self.layers == 0 || self.heads == 0 || self.seq_len < 2 {
            return Err(SynthError::InvalidShape(format!(
                "need L >= 1, H >= 1, T >= 2 (got L={} H={} T={})",
                self.layers, self.heads, self.seq_len
            )));
        }
        if self.vocab_size < 2 || self.prefix_len == 0 {
            return Err(SynthError::InvalidShape("vocab_size >= 2 and prefix_len >= 1 required".into()));
        }
        Ok(())
    }

    /// Drop 7, replace 7 and one prefix insertion, with the synthetic
    /// prefix embedded in the plan.
    pub fn plan(&self) -> PerturbationPlan {
        let mut plan = PerturbationPlan::default_plan(self.seed, Some(SYNTH_PREFIX_ID.to_string()));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::MAX);
        let prefix = (0..self.prefix_len).map(|_| rng.gen_range(0..self.vocab_size as u32)).collect();
        plan.prefixes.insert(SYNTH_PREFIX_ID.to_string(), prefix);
        plan
    }
}

/// One generated sample with its perturbed counterparts (plan order).
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub sample_id: String,
    pub label: u8,
    pub tokens: TokenSequence,
    pub stack: AttentionStack,
    pub perturbed: Vec<DumpEntry>,
    pub logprobs: LogProbRecord,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub config: SynthConfig,
    pub plan: PerturbationPlan,
    pub samples: Vec<SynthSample>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Causal softmax of `logits[i][j] / temperature` for j ≤ i.
fn causal_rows(logits: &[f64], t: usize, temperature: f64, out: &mut Vec<f32>) {
    for i in 0..t {
        let row = &logits[i * t..i * t + i + 1];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|x| ((x - m) / temperature).exp()).collect();
        let s: f64 = e.iter().sum();
        out.extend(e.iter().map(|v| (v / s) as f32));
        out.extend(std::iter::repeat_n(0.0f32, t - i - 1));
    }
}

fn sample_id(label: u8, k: usize) -> String {
    if label == 1 {
        format!("mem-{k:04}")
    } else {
        format!("non-{k:04}")
    }
}

fn generate_one(cfg: &SynthConfig, plan: &PerturbationPlan, label: u8, index: usize) -> Result<SynthSample, SynthError> {
    let (l_n, h_n, t) = (cfg.layers, cfg.heads, cfg.seq_len);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let member = label == 1;
    let (lo, hi) = if member {
        cfg.member_temperature
    } else {
        cfg.nonmember_temperature
    };
    let temperature = rng.gen_range(lo..hi);
    let tokens = TokenSequence::new((0..t).map(|_| rng.gen_range(0..cfg.vocab_size as u32)).collect())?;

    // logits[l][h] as T×T row-major
    let mut logits = vec![vec![vec![0.0; t * t]; h_n]; l_n];
    if member {
        for h in 0..h_n {
            let base: Vec<f64> = (0..t * t).map(|_| normal(&mut rng)).collect();
            for layer in logits.iter_mut() {
                layer[h] = base.iter().map(|b| b + cfg.member_layer_noise * normal(&mut rng)).collect();
            }
        }
    } else {
        for layer in logits.iter_mut() {
            for m in layer.iter_mut() {
                m.iter_mut().for_each(|v| *v = normal(&mut rng));
            }
        }
    }
    let mut data = Vec::with_capacity(l_n * h_n * t * t);
    for layer in &logits {
        for m in layer {
            causal_rows(m, t, temperature, &mut data);
        }
    }
    let id = sample_id(label, index);
    let stack = AttentionStack::new(l_n, h_n, t, true, data)?;

    let noise = if member {
        cfg.member_perturb_noise
    } else {
        cfg.nonmember_perturb_noise
    };
    let specs = plan.resolve(t, cfg.vocab_size, &BTreeMap::new())?;
    let mut perturbed = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        let (ptokens, alignment) = apply_perturbation(&tokens, spec)?;
        let tp = ptokens.len();
        // original position behind each perturbed position; replaced tokens
        // keep their logits only for members
        let mut source = vec![None; tp];
        for (i, ip) in alignment.pairs() {
            let replaced = spec.kind == PerturbationKind::Replace && spec.positions.contains(&(i + 1));
            if member || !replaced {
                source[ip] = Some(i);
            }
        }
        let mut pdata = Vec::with_capacity(l_n * h_n * tp * tp);
        let mut plogits = vec![0.0; tp * tp];
        for layer in &logits {
            for m in layer {
                for ip in 0..tp {
                    for jp in 0..tp {
                        plogits[ip * tp + jp] = match (source[ip], source[jp]) {
                            (Some(i), Some(j)) => m[i * t + j] + noise * normal(&mut rng),
                            _ => normal(&mut rng),
                        };
                    }
                }
                causal_rows(&plogits, tp, temperature, &mut pdata);
            }
        }
        let pstack = AttentionStack::new(l_n, h_n, tp, true, pdata)?;
        perturbed.push(
            DumpEntry::new(perturbed_id(&id, k), pstack, label)
                .with_group(Some(encode_alignment(spec.kind, &alignment))),
        );
    }

    let mu = if member {
        cfg.member_logprob_mu
    } else {
        cfg.nonmember_logprob_mu
    };
    let lp: Vec<f32> = (1..t)
        .map(|_| -((mu + cfg.logprob_sigma * normal(&mut rng)).exp()) as f32)
        .collect();
    Ok(SynthSample {
        sample_id: id.clone(),
        label,
        tokens,
        stack,
        perturbed,
        logprobs: LogProbRecord::new(id, lp, SYNTH_MODEL_TAG).with_label(label),
    })
}

/// Generates members first, then non-members. Sample `k` of each class uses
/// its own RNG stream, so output does not depend on thread scheduling.
pub fn generate(config: &SynthConfig) -> Result<SynthData, SynthError> {
    config.check()?;
    let plan = config.plan();
    let jobs: Vec<(u8, usize)> = (0..config.n_members)
        .map(|k| (1u8, k))
        .chain((0..config.n_nonmembers).map(|k| (0u8, k)))
        .collect();
    let samples = jobs
        .par_iter()
        .enumerate()
        .map(|(stream, &(label, k))| {
            let mut s = generate_one(config, &plan, label, stream)?;
            s.sample_id = sample_id(label, k);
            s.logprobs.sample_id = s.sample_id.clone();
            for (j, e) in s.perturbed.iter_mut().enumerate() {
                e.id = perturbed_id(&s.sample_id, j);
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    Ok(SynthData {
        config: config.clone(),
        plan,
        samples,
    })
}

pub const SYNTH_ATTENTION_FILE: &str = "attn.atnd";
pub const SYNTH_PERTURBED_FILE: &str = "attn_perturbed.atnd";
pub const SYNTH_LOGPROB_FILE: &str = "logprobs.lgpd";
pub const SYNTH_PLAN_FILE: &str = "plan.json";

impl SynthData {
    /// Writes attention, perturbed attention, log-prob dumps and the plan
    /// into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir).map_err(DataError::from)?;
        let entries: Vec<DumpEntry> = self
            .samples
            .iter()
            .map(|s| DumpEntry::new(s.sample_id.clone(), s.stack.clone(), s.label))
            .collect();
        write_attention_dump(&entries, SYNTH_MODEL_TAG, dir.join(SYNTH_ATTENTION_FILE))?;
        let perturbed: Vec<DumpEntry> = self.samples.iter().flat_map(|s| s.perturbed.iter().cloned()).collect();
        write_attention_dump(&perturbed, SYNTH_MODEL_TAG, dir.join(SYNTH_PERTURBED_FILE))?;
        let records: Vec<LogProbRecord> = self.samples.iter().map(|s| s.logprobs.clone()).collect();
        write_logprob_dump(&records, dir.join(SYNTH_LOGPROB_FILE))?;
        self.plan.save(&dir.join(SYNTH_PLAN_FILE))?;
        Ok(())
    }
}
