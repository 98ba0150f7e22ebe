//! Criterion runners shared by the oracle test files and the CLI acceptance
//! target. Each returns a short summary on success and the first mismatch on
//! failure.

use std::time::Instant;

use attenmia_core::classifier::{gradient_check, loss_gradient, MlpModel};
use attenmia_core::data::{AttentionStack, TokenSequence};
use attenmia_core::features::{
    barycenter_drift, barycenter_row, consistency_corr, consistency_frob, consistency_kl, kl_to_uniform,
};
use attenmia_core::metrics::{hellinger, lcs_len, pearson, roc_auc, rouge_l, tpr_at_fpr, ScoreSet};
use attenmia_core::perturb::{
    apply_perturbation, concentration_delta, kl_shift, Alignment, PerturbationSpec, PerturbedPair,
};
use attenmia_core::transformer::{ModelConfig, TinyTransformer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64, what: &str) -> Result<(), String> {
    check((a - b).abs() <= tol, || format!("{what}: library {a} vs oracle {b}"))
}

/// Every feature op against its oracle on `n` seeded random stacks
/// (L ≤ 4, H ≤ 4, T ≤ 8) at 1e-10, scaled by the oracle magnitude above 1.
pub fn feature_oracles(seed: u64, n: usize) -> Outcome {
    const TOL: f64 = 1e-10;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0usize;
    let mut worst = 0.0f64;
    // absolute below magnitude 1, relative above: concentration_delta divides
    // by κ clamped at 1e-12 and can reach 1e11 on flat maps
    let mut cmp = |a: f64, b: f64, what: &str| -> Result<(), String> {
        let scale = b.abs().max(1.0);
        worst = worst.max((a - b).abs() / scale);
        close(a, b, TOL * scale, what)
    };
    for case in 0..n {
        let layers = rng.gen_range(1..=4);
        let heads = rng.gen_range(1..=4);
        let t = rng.gen_range(2..=8);
        let causal = rng.gen_bool(0.5);
        let s = super::random_stack(&mut rng, layers, heads, t, causal);
        s.validate("oracle").map_err(|e| e.to_string())?;
        for l in 0..layers {
            for h in 0..heads {
                let (lo, ho) = (l + 1, h + 1);
                cmp(kl_to_uniform(&s, lo, ho).unwrap(), super::kl_to_uniform(&s, l, h), "kl_to_uniform")?;
                for i in 0..t {
                    cmp(barycenter_row(s.map(l, h), i + 1).unwrap(), super::barycenter(&s, l, h, i), "barycenter_row")?;
                }
                checks += 1 + t;
                if l + 1 < layers {
                    cmp(consistency_corr(&s, lo, ho).unwrap(), super::consistency_corr(&s, l, h), "consistency_corr")?;
                    cmp(consistency_frob(&s, lo, ho).unwrap(), super::consistency_frob(&s, l, h), "consistency_frob")?;
                    let kl = consistency_kl(&s, lo, ho).unwrap();
                    cmp(kl, super::consistency_kl(&s, l, h), "consistency_kl")?;
                    check(kl.is_finite() && kl >= -TOL, || format!("consistency_kl {kl} negative"))?;
                    let (m, v) = barycenter_drift(&s, lo, ho).unwrap();
                    let (om, ov) = super::barycenter_drift(&s, l, h);
                    cmp(m, om, "barycenter_drift mean")?;
                    cmp(v, ov, "barycenter_drift variance")?;
                    checks += 5;
                }
            }
        }

        let tokens = TokenSequence::new((0..t as u32).map(|x| x + 10).collect()).unwrap();
        let spec = match case % 3 {
            0 => PerturbationSpec::drop(vec![rng.gen_range(1..=t)]),
            1 => PerturbationSpec::replace(vec![rng.gen_range(1..=t)], rng.gen(), 100),
            _ => PerturbationSpec::prefix(TokenSequence::new(vec![1, 2]).unwrap()),
        };
        let (ptoks, alignment) = apply_perturbation(&tokens, &spec).map_err(|e| e.to_string())?;
        let p = super::random_stack(&mut rng, layers, heads, ptoks.len(), causal);
        let images = alignment.images().to_vec();
        let pair = PerturbedPair::new(s.clone(), p.clone(), alignment).map_err(|e| e.to_string())?;
        let q = super::random_stack(&mut rng, layers, heads, t, causal);
        let same_len = PerturbedPair::new(s.clone(), q.clone(), Alignment::identity(t)).unwrap();
        let identity: Vec<Option<usize>> = (0..t).map(Some).collect();
        for l in 0..layers {
            for h in 0..heads {
                let shift = kl_shift(&pair, l + 1, h + 1).unwrap();
                cmp(shift, super::kl_shift(&s, &p, &images, l, h), "kl_shift")?;
                check(shift >= -TOL, || format!("kl_shift {shift} negative"))?;
                cmp(
                    kl_shift(&same_len, l + 1, h + 1).unwrap(),
                    super::kl_shift(&s, &q, &identity, l, h),
                    "kl_shift (length-preserving)",
                )?;
                cmp(
                    concentration_delta(&pair, l + 1, h + 1).unwrap(),
                    super::concentration_delta(&s, &p, l, h),
                    "concentration_delta",
                )?;
                checks += 3;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 10.0, || format!("took {secs:.2}s, limit 10s"))?;
    Ok(format!("{n} stacks, {checks} comparisons, max scaled |diff| {worst:.1e}, {secs:.2}s"))
}

/// Row sums, causal zeros and agreement with the straight-line reference on
/// `n` seeded bundles (d ≤ 16, L ≤ 3, T ≤ 8) at 1e-5.
pub fn transformer_invariants(seed: u64, n: usize) -> Outcome {
    const TOL: f64 = 1e-5;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in 0..n {
        let heads = [1, 2, 4][rng.gen_range(0..3)];
        let d = heads * rng.gen_range(1..=16 / heads);
        let layers = rng.gen_range(1..=3);
        let vocab = rng.gen_range(5..=40);
        let t = rng.gen_range(1..=8);
        let cfg = ModelConfig::new(layers, heads, d, rng.gen_range(1..=32), vocab, 8).map_err(|e| e.to_string())?;
        let w = super::random_bundle(&mut rng, &cfg, seed ^ case as u64);
        let tokens: Vec<u32> = (0..t).map(|_| rng.gen_range(0..vocab as u32)).collect();
        let model = TinyTransformer::new(cfg.clone(), w.clone());
        let out = model
            .forward(&TokenSequence::new(tokens.clone()).unwrap())
            .map_err(|e| e.to_string())?;
        let a: &AttentionStack = &out.attention;
        let reference = super::reference_attention(&cfg, &w, &tokens);
        for l in 0..layers {
            for h in 0..heads {
                for i in 0..t {
                    let mut sum = 0.0;
                    for j in 0..t {
                        let v = super::at(a, l, h, i, j);
                        sum += v;
                        if j > i {
                            check(v == 0.0, || format!("case {case}: causal entry ({l},{h},{i},{j}) = {v}"))?;
                        } else {
                            let diff = (v - reference[l][h][i][j]).abs();
                            worst = worst.max(diff);
                            check(diff <= TOL, || {
                                format!("case {case}: ({l},{h},{i},{j}) {v} vs reference {}", reference[l][h][i][j])
                            })?;
                        }
                    }
                    check((sum - 1.0).abs() <= TOL, || format!("case {case}: row sum {sum}"))?;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 30.0, || format!("took {secs:.2}s, limit 30s"))?;
    Ok(format!("{n} bundles, max |diff| {worst:.1e}, {secs:.2}s"))
}

/// BCE loss of a flat-parameter ReLU MLP with identity normalization.
fn oracle_loss(sizes: &[usize], params: &[f64], x: &[f64], y: f64) -> f64 {
    let mut a = x.to_vec();
    let mut off = 0;
    for k in 0..sizes.len() - 1 {
        let (din, dout) = (sizes[k], sizes[k + 1]);
        let mut z = vec![0.0; dout];
        for o in 0..dout {
            z[o] = params[off + din * dout + o];
            for i in 0..din {
                z[o] += params[off + o * din + i] * a[i];
            }
            if k + 2 < sizes.len() {
                z[o] = z[o].max(0.0);
            }
        }
        off += din * dout + dout;
        a = z;
    }
    let p = 1.0 / (1.0 + (-a[0]).exp());
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Analytic gradients against central differences of an independent loss
/// on `n` random small models; max relative error must stay below 1e-6.
pub fn gradient_oracle(seed: u64, n: usize) -> Outcome {
    const STEP: f64 = 1e-5;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in 0..n {
        let (input, hidden): (usize, Vec<usize>) = if case % 2 == 0 {
            (38, vec![8])
        } else {
            (rng.gen_range(1..=12), vec![rng.gen_range(1..=8), rng.gen_range(1..=6)])
        };
        // random biases too: zero biases put dead-layer outputs on the ReLU kink
        let shape = MlpModel::random(input, &hidden, &mut rng);
        let params: Vec<f64> = shape.params().iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let model = MlpModel::from_parts(
            shape.layer_sizes().to_vec(),
            params,
            shape.standardizer().clone(),
            shape.feature_names().to_vec(),
            0,
        )
        .map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..input).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let label = (case % 3 == 0) as u8;
        let (loss, grad) = loss_gradient(&model, &[(x.clone(), label)]);
        let sizes = model.layer_sizes().to_vec();
        let base = model.params().to_vec();
        close(loss, oracle_loss(&sizes, &base, &x, label as f64), 1e-9, "loss")?;
        for (k, &a) in grad.iter().enumerate() {
            let mut p = base.clone();
            p[k] += STEP;
            let up = oracle_loss(&sizes, &p, &x, label as f64);
            p[k] -= 2.0 * STEP;
            let down = oracle_loss(&sizes, &p, &x, label as f64);
            let num = (up - down) / (2.0 * STEP);
            let rel = (a - num).abs() / (a.abs() + num.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        worst = worst.max(gradient_check(&model, &x, label));
        check(worst < 1e-6, || format!("case {case}: relative error {worst:.3e}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 10.0, || format!("took {secs:.2}s, limit 10s"))?;
    Ok(format!("{n} models, max relative error {worst:.2e}, {secs:.2}s"))
}

/// ROC, TPR@FPR, Hellinger, ROUGE-L and Pearson against their oracles.
pub fn metrics_oracles(seed: u64) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..100 {
        let n = rng.gen_range(2..=200);
        let coarse = rng.gen_bool(0.5);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for k in 0..n {
            // both classes always present
            let member = if k < 2 { k == 0 } else { rng.gen_bool(0.4) };
            let mut s: f64 = rng.gen_range(-1.0..1.0) + if member { 0.3 } else { 0.0 };
            if coarse {
                s = (s * 5.0).round() / 5.0;
            }
            if member {
                pos.push(s);
            } else {
                neg.push(s);
            }
        }
        let set = ScoreSet::from_groups(&pos, &neg).map_err(|e| e.to_string())?;
        close(roc_auc(&set).unwrap(), super::auc_pairs(&pos, &neg), 1e-12, &format!("roc_auc case {case}"))?;
        for cap in [0.0, 0.01, 0.05, 0.2, 1.0] {
            let lib = tpr_at_fpr(&set, cap).unwrap();
            let ora = super::tpr_exhaustive(&pos, &neg, cap);
            check(lib == ora, || format!("tpr_at_fpr case {case} cap {cap}: {lib} vs {ora}"))?;
        }
        let bins = [1, 5, 32][case % 3];
        close(hellinger(&pos, &neg, bins).unwrap(), super::hellinger(&pos, &neg, bins), 1e-12, "hellinger")?;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + rng.gen_range(-1.0..1.0)).collect();
        close(pearson(&x, &y), super::pearson(&x, &y), 1e-12, "pearson")?;
    }
    let a: Vec<f64> = (0..50).map(|_| rng.gen()).collect();
    let h_same = hellinger(&a, &a, 32).unwrap();
    check(h_same == 0.0, || format!("hellinger(identical) = {h_same}"))?;
    let b: Vec<f64> = a.iter().map(|v| v + 10.0).collect();
    let h_disjoint = hellinger(&a, &b, 32).unwrap();
    check(h_disjoint == 1.0, || format!("hellinger(disjoint) = {h_disjoint}"))?;

    let seqs = super::all_sequences(3, 6);
    for c in &seqs {
        for r in &seqs {
            let l = super::lcs_memo(c, r);
            check(lcs_len(c, r) == l, || format!("lcs {c:?} {r:?}"))?;
            let s = rouge_l(c, r);
            let p = if c.is_empty() { 0.0 } else { l as f64 / c.len() as f64 };
            let rc = if r.is_empty() { 0.0 } else { l as f64 / r.len() as f64 };
            let f = if l == 0 { 0.0 } else { 2.0 * p * rc / (p + rc) };
            check(s.precision == p && s.recall == rc && (s.f1 - f).abs() <= 1e-15, || {
                format!("rouge_l {c:?} {r:?}: {s:?}")
            })?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, || format!("took {secs:.2}s, limit 60s"))?;
    Ok(format!(
        "100 score sets, {} ROUGE-L pairs, {secs:.2}s",
        seqs.len() * seqs.len()
    ))
}
