use super::{FeatureError, FeatureSchema, FeatureVector};
use crate::data::{AttentionStack, AttnMap};
use crate::metrics::pearson;

/// Floor applied to KL denominators.
pub const KL_FLOOR: f64 = 1e-12;

fn check_index(what: &'static str, index: usize, max: usize) -> Result<usize, FeatureError> {
    if index == 0 || index > max {
        return Err(FeatureError::IndexOutOfRange { what, index, max });
    }
    Ok(index - 1)
}

fn check_layer_head(stack: &AttentionStack, layer: usize, head: usize) -> Result<(usize, usize), FeatureError> {
    Ok((
        check_index("layer", layer, stack.layers())?,
        check_index("head", head, stack.heads())?,
    ))
}

fn check_transition(stack: &AttentionStack, layer: usize, head: usize) -> Result<(usize, usize), FeatureError> {
    Ok((
        check_index("layer", layer, stack.layers().saturating_sub(1))?,
        check_index("head", head, stack.heads())?,
    ))
}

/// `KL(p ‖ q)` in nats over the given slices, skipping zero-mass entries of
/// `p` and flooring `q` at [`KL_FLOOR`].
pub fn row_kl(p: impl IntoIterator<Item = f64>, q: impl IntoIterator<Item = f64>) -> f64 {
    p.into_iter()
        .zip(q)
        .filter(|(pj, _)| *pj > 0.0)
        .map(|(pj, qj)| pj * (pj / qj.max(KL_FLOOR)).ln())
        .sum()
}

/// Mean over rows of `KL(row ‖ U_T)` for one map.
pub fn map_concentration(map: AttnMap<'_>) -> f64 {
    let t = map.seq_len();
    let ln_t = (t as f64).ln();
    let total: f64 = (0..t)
        .map(|i| {
            map.row(i)
                .iter()
                .map(|&v| v as f64)
                .filter(|&p| p > 0.0)
                .map(|p| p * (p.ln() + ln_t))
                .sum::<f64>()
        })
        .sum();
    total / t as f64
}

/// Concentration κ of head `head` at layer `layer` (both 1-based).
pub fn kl_to_uniform(stack: &AttentionStack, layer: usize, head: usize) -> Result<f64, FeatureError> {
    let (l, h) = check_layer_head(stack, layer, head)?;
    Ok(map_concentration(stack.map(l, h)))
}

/// Pearson correlation of the flattened maps at layers ℓ and ℓ+1.
pub fn consistency_corr(stack: &AttentionStack, layer: usize, head: usize) -> Result<f64, FeatureError> {
    let (l, h) = check_transition(stack, layer, head)?;
    let a: Vec<f64> = stack.map(l, h).values().iter().map(|&v| v as f64).collect();
    let b: Vec<f64> = stack.map(l + 1, h).values().iter().map(|&v| v as f64).collect();
    Ok(pearson(&a, &b))
}

/// `‖A^{ℓ+1} − A^ℓ‖_F / T²`.
pub fn consistency_frob(stack: &AttentionStack, layer: usize, head: usize) -> Result<f64, FeatureError> {
    let (l, h) = check_transition(stack, layer, head)?;
    let t = stack.seq_len() as f64;
    let a = stack.map(l, h).values();
    let b = stack.map(l + 1, h).values();
    let ss: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = y as f64 - x as f64;
            d * d
        })
        .sum();
    Ok(ss.sqrt() / (t * t))
}

/// Mean row-wise `KL(A^ℓ_i ‖ A^{ℓ+1}_i)`, restricted to unmasked columns on
/// causal stacks.
pub fn consistency_kl(stack: &AttentionStack, layer: usize, head: usize) -> Result<f64, FeatureError> {
    let (l, h) = check_transition(stack, layer, head)?;
    let t = stack.seq_len();
    let a = stack.map(l, h);
    let b = stack.map(l + 1, h);
    let total: f64 = (0..t)
        .map(|i| {
            let width = if stack.is_causal() { i + 1 } else { t };
            row_kl(
                a.row(i)[..width].iter().map(|&v| v as f64),
                b.row(i)[..width].iter().map(|&v| v as f64),
            )
        })
        .sum();
    Ok(total / t as f64)
}

/// Barycenter `Σ_j j · A_{i,j}` of row `i` with 1-based positions `j`.
/// `i` is 1-based.
pub fn barycenter_row(map: AttnMap<'_>, i: usize) -> Result<f64, FeatureError> {
    let i0 = check_index("row", i, map.seq_len())?;
    Ok(row_barycenter(map.row(i0)))
}

fn row_barycenter(row: &[f32]) -> f64 {
    row.iter()
        .enumerate()
        .map(|(j, &v)| (j + 1) as f64 * v as f64)
        .sum()
}

/// Mean and population variance of `|c_i^{ℓ+1} − c_i^ℓ|` over rows.
pub fn barycenter_drift(stack: &AttentionStack, layer: usize, head: usize) -> Result<(f64, f64), FeatureError> {
    let (l, h) = check_transition(stack, layer, head)?;
    let a = stack.map(l, h);
    let b = stack.map(l + 1, h);
    let t = stack.seq_len();
    let drifts: Vec<f64> = (0..t)
        .map(|i| (row_barycenter(b.row(i)) - row_barycenter(a.row(i))).abs())
        .collect();
    let mean = drifts.iter().sum::<f64>() / t as f64;
    let var = drifts.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / t as f64;
    Ok((mean, var))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionalOptions {
    pub include_concentration: bool,
}

impl Default for TransitionalOptions {
    fn default() -> Self {
        Self {
            include_concentration: true,
        }
    }
}

/// Full transitional feature vector for one stack, in
/// [`FeatureSchema::transitional`] order.
pub fn extract_transitional(
    sample_id: &str,
    stack: &AttentionStack,
    options: TransitionalOptions,
) -> Result<FeatureVector, FeatureError> {
    let (layers, heads) = (stack.layers(), stack.heads());
    if layers < 2 {
        return Err(FeatureError::TooFewLayers(layers));
    }
    let schema = FeatureSchema::transitional(layers, heads, options.include_concentration);
    let mut values = Vec::with_capacity(schema.len());
    if options.include_concentration {
        for l in 0..layers {
            for h in 0..heads {
                values.push(map_concentration(stack.map(l, h)));
            }
        }
    }
    let pairs = (layers - 1) * heads;
    let mut corr = Vec::with_capacity(pairs);
    let mut frob = Vec::with_capacity(pairs);
    let mut kl = Vec::with_capacity(pairs);
    let mut bmean = Vec::with_capacity(pairs);
    let mut bvar = Vec::with_capacity(pairs);
    for l in 1..layers {
        for h in 1..=heads {
            corr.push(consistency_corr(stack, l, h)?);
            frob.push(consistency_frob(stack, l, h)?);
            kl.push(consistency_kl(stack, l, h)?);
            let (m, v) = barycenter_drift(stack, l, h)?;
            bmean.push(m);
            bvar.push(v);
        }
    }
    for block in [corr, frob, kl, bmean, bvar] {
        values.extend(block);
    }
    debug_assert_eq!(values.len(), schema.len());
    for (v, c) in values.iter().zip(schema.columns()) {
        if !v.is_finite() {
            return Err(FeatureError::NonFinite {
                sample: sample_id.to_string(),
                column: c.name(),
            });
        }
    }
    Ok(FeatureVector {
        sample_id: sample_id.to_string(),
        values,
        schema_hash: schema.hash().to_string(),
    })
}
