//! Brute-force reference implementations shared by the oracle suites and the
//! CLI acceptance target. Nothing here calls into the library's math.
#![allow(dead_code, clippy::needless_range_loop)]

use attenmia_core::data::AttentionStack;
use attenmia_core::transformer::{ModelConfig, WeightBundle};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random row-stochastic stack. Causal stacks zero the upper triangle; a
/// fraction of rows is made one-hot or near-uniform to cover the extremes.
pub fn random_stack(rng: &mut ChaCha8Rng, layers: usize, heads: usize, t: usize, causal: bool) -> AttentionStack {
    let mut data = Vec::with_capacity(layers * heads * t * t);
    for _ in 0..layers * heads {
        for i in 0..t {
            let width = if causal { i + 1 } else { t };
            let style: f64 = rng.gen();
            let mut row: Vec<f64> = (0..width)
                .map(|_| {
                    if style < 0.1 {
                        1.0
                    } else {
                        let u: f64 = rng.gen();
                        u * u * u
                    }
                })
                .collect();
            if style > 0.9 {
                let hot = rng.gen_range(0..width);
                row.iter_mut().enumerate().for_each(|(j, v)| *v = if j == hot { 1.0 } else { 0.0 });
            }
            let s: f64 = row.iter().sum();
            if s == 0.0 {
                row[0] = 1.0;
            } else {
                row.iter_mut().for_each(|v| *v /= s);
            }
            for j in 0..t {
                data.push(if j < width { row[j] as f32 } else { 0.0 });
            }
        }
    }
    AttentionStack::new(layers, heads, t, causal, data).unwrap()
}

/// Entry `(l, h, i, j)`, all 0-based, widened to f64.
pub fn at(stack: &AttentionStack, l: usize, h: usize, i: usize, j: usize) -> f64 {
    let t = stack.seq_len();
    stack.as_slice()[((l * stack.heads() + h) * t + i) * t + j] as f64
}

fn kl_term(p: f64, q: f64) -> f64 {
    if p > 0.0 {
        p * (p / q.max(1e-12)).ln()
    } else {
        0.0
    }
}

pub fn kl_to_uniform(stack: &AttentionStack, l: usize, h: usize) -> f64 {
    let t = stack.seq_len();
    let mut total = 0.0;
    for i in 0..t {
        for j in 0..t {
            let p = at(stack, l, h, i, j);
            if p > 0.0 {
                total += p * (p * t as f64).ln();
            }
        }
    }
    total / t as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let ex = x.iter().sum::<f64>() / n;
    let ey = y.iter().sum::<f64>() / n;
    let exy = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / n;
    let exx = x.iter().map(|a| a * a).sum::<f64>() / n;
    let eyy = y.iter().map(|b| b * b).sum::<f64>() / n;
    let cov = exy - ex * ey;
    let vx = exx - ex * ex;
    let vy = eyy - ey * ey;
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Two-pass covariance formula, numerically closer to the library's.
pub fn pearson_centered(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut mx = 0.0;
    let mut my = 0.0;
    for k in 0..n {
        mx += x[k];
        my += y[k];
    }
    mx /= n as f64;
    my /= n as f64;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for k in 0..n {
        cov += (x[k] - mx) * (y[k] - my);
        vx += (x[k] - mx) * (x[k] - mx);
        vy += (y[k] - my) * (y[k] - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx.sqrt() * vy.sqrt())
}

fn flat(stack: &AttentionStack, l: usize, h: usize) -> Vec<f64> {
    let t = stack.seq_len();
    let mut v = Vec::new();
    for i in 0..t {
        for j in 0..t {
            v.push(at(stack, l, h, i, j));
        }
    }
    v
}

pub fn consistency_corr(stack: &AttentionStack, l: usize, h: usize) -> f64 {
    pearson_centered(&flat(stack, l, h), &flat(stack, l + 1, h))
}

pub fn consistency_frob(stack: &AttentionStack, l: usize, h: usize) -> f64 {
    let t = stack.seq_len();
    let mut ss = 0.0;
    for i in 0..t {
        for j in 0..t {
            let d = at(stack, l + 1, h, i, j) - at(stack, l, h, i, j);
            ss += d * d;
        }
    }
    ss.sqrt() / (t * t) as f64
}

pub fn consistency_kl(stack: &AttentionStack, l: usize, h: usize) -> f64 {
    let t = stack.seq_len();
    let mut total = 0.0;
    for i in 0..t {
        for j in 0..t {
            if stack.is_causal() && j > i {
                continue;
            }
            total += kl_term(at(stack, l, h, i, j), at(stack, l + 1, h, i, j));
        }
    }
    total / t as f64
}

pub fn barycenter(stack: &AttentionStack, l: usize, h: usize, i: usize) -> f64 {
    let mut c = 0.0;
    for j in 0..stack.seq_len() {
        c += (j + 1) as f64 * at(stack, l, h, i, j);
    }
    c
}

pub fn barycenter_drift(stack: &AttentionStack, l: usize, h: usize) -> (f64, f64) {
    let t = stack.seq_len();
    let d: Vec<f64> = (0..t)
        .map(|i| (barycenter(stack, l + 1, h, i) - barycenter(stack, l, h, i)).abs())
        .collect();
    let mean = d.iter().sum::<f64>() / t as f64;
    let mut var = 0.0;
    for x in &d {
        var += (x - mean) * (x - mean);
    }
    (mean, var / t as f64)
}

/// Δκ from 0-based images (`None` = removed). Rows and columns restricted to
/// surviving positions and renormalized unless the map is the identity.
pub fn kl_shift(orig: &AttentionStack, pert: &AttentionStack, images: &[Option<usize>], l: usize, h: usize) -> f64 {
    let pairs: Vec<(usize, usize)> = images
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|p| (i, p)))
        .collect();
    let identity = pert.seq_len() == images.len() && pairs.len() == images.len() && pairs.iter().all(|(a, b)| a == b);
    let mut total = 0.0;
    for &(i, ip) in &pairs {
        let mut p: Vec<f64> = pairs.iter().map(|&(j, _)| at(orig, l, h, i, j)).collect();
        let mut q: Vec<f64> = pairs.iter().map(|&(_, jp)| at(pert, l, h, ip, jp)).collect();
        if !identity {
            for v in [&mut p, &mut q] {
                let s: f64 = v.iter().sum();
                let n = v.len() as f64;
                for x in v.iter_mut() {
                    *x = if s > 0.0 { *x / s } else { 1.0 / n };
                }
            }
        }
        for k in 0..p.len() {
            total += kl_term(p[k], q[k]);
        }
    }
    total / pairs.len() as f64
}

pub fn concentration_delta(orig: &AttentionStack, pert: &AttentionStack, l: usize, h: usize) -> f64 {
    let k = kl_to_uniform(orig, l, h);
    (kl_to_uniform(pert, l, h) - k) / k.max(1e-12)
}

/// Attention of every layer and head by a straight-line forward pass: Q and K
/// formed explicitly per head, softmax over the unmasked prefix only.
pub fn reference_attention(cfg: &ModelConfig, w: &WeightBundle, tokens: &[u32]) -> Vec<Vec<Vec<Vec<f64>>>> {
    let t = tokens.len();
    let d = cfg.d_model;
    let dh = d / cfg.n_heads;
    let eps = cfg.layernorm_epsilon;
    let ln = |x: &[f64], s: &[f64], b: &[f64]| -> Vec<f64> {
        let mu = x.iter().sum::<f64>() / d as f64;
        let var = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / d as f64;
        (0..d).map(|k| (x[k] - mu) / (var + eps).sqrt() * s[k] + b[k]).collect()
    };
    let mat = |x: &[f64], m: &attenmia_core::transformer::Matrix| -> Vec<f64> {
        (0..m.cols).map(|c| (0..m.rows).map(|r| x[r] * m.at(r, c)).sum()).collect()
    };
    let mut x: Vec<Vec<f64>> = (0..t)
        .map(|p| (0..d).map(|k| w.tok_emb.at(tokens[p] as usize, k) + w.pos_emb.at(p, k)).collect())
        .collect();
    let mut out = Vec::new();
    for lw in &w.layers {
        let n: Vec<Vec<f64>> = x.iter().map(|r| ln(r, &lw.ln1_scale, &lw.ln1_bias)).collect();
        let q: Vec<Vec<f64>> = n.iter().map(|r| mat(r, &lw.w_q)).collect();
        let k: Vec<Vec<f64>> = n.iter().map(|r| mat(r, &lw.w_k)).collect();
        let v: Vec<Vec<f64>> = n.iter().map(|r| mat(r, &lw.w_v)).collect();
        let mut ctx = vec![vec![0.0; d]; t];
        let mut heads = Vec::new();
        for h in 0..cfg.n_heads {
            let mut a = vec![vec![0.0; t]; t];
            for i in 0..t {
                let mut logits = Vec::new();
                for j in 0..=i {
                    let mut s = 0.0;
                    for c in h * dh..(h + 1) * dh {
                        s += q[i][c] * k[j][c];
                    }
                    logits.push(s / (dh as f64).sqrt());
                }
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = logits.iter().map(|s| (s - m).exp()).sum();
                for j in 0..=i {
                    a[i][j] = (logits[j] - m).exp() / z;
                    for c in h * dh..(h + 1) * dh {
                        ctx[i][c] += a[i][j] * v[j][c];
                    }
                }
            }
            heads.push(a);
        }
        out.push(heads);
        for i in 0..t {
            let o = mat(&ctx[i], &lw.w_o);
            for c in 0..d {
                x[i][c] += o[c];
            }
            let n2 = ln(&x[i], &lw.ln2_scale, &lw.ln2_bias);
            let mut inner = mat(&n2, &lw.mlp_w_in);
            for (f, b) in inner.iter_mut().zip(&lw.mlp_b_in) {
                let z = *f + b;
                *f = 0.5 * z * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (z + 0.044715 * z * z * z)).tanh());
            }
            let m = mat(&inner, &lw.mlp_w_out);
            for c in 0..d {
                x[i][c] += m[c] + lw.mlp_b_out[c];
            }
        }
    }
    out
}

/// Random bundle with non-trivial layernorm parameters and biases.
pub fn random_bundle(rng: &mut ChaCha8Rng, cfg: &ModelConfig, seed: u64) -> WeightBundle {
    let mut w = WeightBundle::random(cfg, seed, 0.8, rng.gen_bool(0.5));
    let mut jitter = |v: &mut Vec<f64>, base: f64| v.iter_mut().for_each(|x| *x = base + rng.gen_range(-0.3..0.3));
    for lw in &mut w.layers {
        jitter(&mut lw.ln1_scale, 1.0);
        jitter(&mut lw.ln1_bias, 0.0);
        jitter(&mut lw.ln2_scale, 1.0);
        jitter(&mut lw.ln2_bias, 0.0);
        jitter(&mut lw.mlp_b_in, 0.0);
        jitter(&mut lw.mlp_b_out, 0.0);
    }
    w
}

/// Pairwise concordance statistic.
pub fn auc_pairs(pos: &[f64], neg: &[f64]) -> f64 {
    let mut s = 0.0;
    for &p in pos {
        for &n in neg {
            if p > n {
                s += 1.0;
            } else if p == n {
                s += 0.5;
            }
        }
    }
    s / (pos.len() * neg.len()) as f64
}

/// Best TPR over every threshold (observed scores and +∞) with FPR ≤ cap.
pub fn tpr_exhaustive(pos: &[f64], neg: &[f64], cap: f64) -> f64 {
    let mut thresholds: Vec<f64> = pos.iter().chain(neg).cloned().collect();
    thresholds.push(f64::INFINITY);
    let mut best: f64 = 0.0;
    for th in thresholds {
        let tp = pos.iter().filter(|&&s| s >= th).count() as f64;
        let fp = neg.iter().filter(|&&s| s >= th).count() as f64;
        if fp / neg.len() as f64 <= cap {
            best = best.max(tp / pos.len() as f64);
        }
    }
    best
}

/// Histogram over the pooled range (last bin closed) plus Bhattacharyya.
pub fn hellinger(a: &[f64], b: &[f64], bins: usize) -> f64 {
    let lo = a.iter().chain(b).cloned().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).cloned().fold(f64::NEG_INFINITY, f64::max);
    let nb = if hi > lo { bins } else { 1 };
    let mut ca = vec![0.0; nb];
    let mut cb = vec![0.0; nb];
    let bin = |v: f64| -> usize {
        if nb == 1 {
            return 0;
        }
        let k = ((v - lo) / ((hi - lo) / nb as f64)).floor() as usize;
        if k >= nb {
            nb - 1
        } else {
            k
        }
    };
    for &v in a {
        ca[bin(v)] += 1.0;
    }
    for &v in b {
        cb[bin(v)] += 1.0;
    }
    let mut bc = 0.0;
    for k in 0..nb {
        bc += (ca[k] / a.len() as f64 * cb[k] / b.len() as f64).sqrt();
    }
    (1.0 - bc.min(1.0)).max(0.0).sqrt()
}

/// LCS length by memoized recursion on suffixes.
pub fn lcs_memo(a: &[u8], b: &[u8]) -> usize {
    fn go(a: &[u8], b: &[u8], i: usize, j: usize, memo: &mut [Option<usize>]) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        let key = i * (b.len() + 1) + j;
        if let Some(v) = memo[key] {
            return v;
        }
        let v = if a[i] == b[j] {
            1 + go(a, b, i + 1, j + 1, memo)
        } else {
            go(a, b, i + 1, j, memo).max(go(a, b, i, j + 1, memo))
        };
        memo[key] = Some(v);
        v
    }
    go(a, b, 0, 0, &mut vec![None; (a.len() + 1) * (b.len() + 1)])
}

/// Every sequence of length ≤ `max_len` over `0..alphabet`.
pub fn all_sequences(alphabet: u8, max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for c in 0..alphabet {
                let mut e: Vec<u8> = s.clone();
                e.push(c);
                next.push(e);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub mod suites;
