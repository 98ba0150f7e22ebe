use super::MetricError;

pub const DEFAULT_BINS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count_a: usize,
    pub count_b: usize,
}

/// Equal-width histograms of `a` and `b` over their pooled `[min, max]`
/// range. A zero-width range collapses to a single bin.
pub fn histogram_pair(a: &[f64], b: &[f64], bins: usize) -> Result<Vec<HistogramBin>, MetricError> {
    if a.is_empty() || b.is_empty() || bins == 0 {
        return Err(MetricError::EmptyInput);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let lo = a.iter().chain(b).cloned().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).cloned().fold(f64::NEG_INFINITY, f64::max);
    let n_bins = if hi > lo { bins } else { 1 };
    let width = (hi - lo) / n_bins as f64;
    let index = |v: f64| -> usize {
        if n_bins == 1 {
            0
        } else {
            (((v - lo) / width).floor() as usize).min(n_bins - 1)
        }
    };
    let mut out: Vec<HistogramBin> = (0..n_bins)
        .map(|k| HistogramBin {
            left: lo + k as f64 * width,
            right: if k + 1 == n_bins { hi } else { lo + (k + 1) as f64 * width },
            count_a: 0,
            count_b: 0,
        })
        .collect();
    for &v in a {
        out[index(v)].count_a += 1;
    }
    for &v in b {
        out[index(v)].count_b += 1;
    }
    Ok(out)
}

/// Hellinger distance between the binned distributions of `a` and `b`.
pub fn hellinger(a: &[f64], b: &[f64], bins: usize) -> Result<f64, MetricError> {
    let hist = histogram_pair(a, b, bins)?;
    // Bhattacharyya coefficient from integer counts keeps the identical and
    // disjoint cases exact.
    let overlap: f64 = hist
        .iter()
        .map(|h| ((h.count_a * h.count_b) as f64).sqrt())
        .sum();
    let bc = (overlap / ((a.len() * b.len()) as f64).sqrt()).min(1.0);
    Ok((1.0 - bc).max(0.0).sqrt())
}

/// Product-moment correlation; 0 when either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "pearson inputs must have equal length");
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    let constant = |v: &[f64]| v.iter().all(|&e| e == v[0]);
    if constant(x) || constant(y) {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hellinger_extremes() {
        let a = [0.1, 0.2, 0.2, 0.35, 0.9];
        assert_eq!(hellinger(&a, &a, 32).unwrap(), 0.0);
        let lo = [0.0, 0.1, 0.2, 0.4];
        let hi = [0.6, 0.7, 1.0];
        assert_eq!(hellinger(&lo, &hi, 32).unwrap(), 1.0);
        assert_eq!(hellinger(&[1.0, 1.0], &[1.0], 32).unwrap(), 0.0);
        assert!(matches!(hellinger(&[], &[1.0], 8), Err(MetricError::EmptyInput)));
    }

    #[test]
    fn hellinger_symmetric() {
        let a = [0.1, 0.5, 0.52, 0.8];
        let b = [0.3, 0.55, 0.9, 0.95, 0.99];
        assert_eq!(hellinger(&a, &b, 8).unwrap(), hellinger(&b, &a, 8).unwrap());
    }

    #[test]
    fn pearson_exact_relations() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]) + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn histogram_counts_cover_inputs() {
        let h = histogram_pair(&[0.0, 0.5, 1.0], &[0.25], 4).unwrap();
        assert_eq!(h.len(), 4);
        assert_eq!(h.iter().map(|b| b.count_a).sum::<usize>(), 3);
        assert_eq!(h[3].count_a, 1); // max lands in the last bin
        assert_eq!(h[1].count_b, 1);
    }
}
