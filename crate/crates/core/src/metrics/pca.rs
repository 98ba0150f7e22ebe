use super::MetricError;

const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Two-component principal-component projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca2 {
    pub mean: Vec<f64>,
    /// Unit-norm principal axes; each axis's largest-magnitude coordinate is positive.
    pub components: [Vec<f64>; 2],
    /// Sample-covariance eigenvalues belonging to the two components.
    pub explained_variance: [f64; 2],
    /// Centered inputs projected onto the components.
    pub projected: Vec<[f64; 2]>,
}

impl Pca2 {
    /// Projects `v` (not centered) onto the components.
    pub fn project_direction(&self, v: &[f64]) -> [f64; 2] {
        [dot(&self.components[0], v), dot(&self.components[1], v)]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and column eigenvectors (`vecs[k][i]` is coordinate
/// `i` of eigenvector `k`).
pub(crate) fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i][i]).collect();
    let vecs = (0..n).map(|k| (0..n).map(|i| v[i][k]).collect()).collect();
    (values, vecs)
}

fn fix_sign(mut v: Vec<f64>) -> Vec<f64> {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Top-two principal components of `vectors` (at least 3, equal dimension).
pub fn pca2(vectors: &[Vec<f64>]) -> Result<Pca2, MetricError> {
    let n = vectors.len();
    if n < 3 {
        return Err(MetricError::TooFewVectors(n));
    }
    let d = vectors[0].len();
    if d == 0 || vectors.iter().any(|v| v.len() != d) {
        return Err(MetricError::DimensionMismatch);
    }
    if vectors.iter().flatten().any(|x| !x.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n as f64)
        .collect();
    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            let c = centered.iter().map(|v| v[i] * v[j]).sum::<f64>() / (n - 1) as f64;
            cov[i][j] = c;
            cov[j][i] = c;
        }
    }
    let (values, vecs) = jacobi_eigen(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    let first = fix_sign(vecs[order[0]].clone());
    let (second, second_var) = if d >= 2 {
        (fix_sign(vecs[order[1]].clone()), values[order[1]].max(0.0))
    } else {
        (vec![0.0; d], 0.0)
    };
    let projected = centered
        .iter()
        .map(|c| [dot(&first, c), dot(&second, c)])
        .collect();
    Ok(Pca2 {
        mean,
        components: [first, second],
        explained_variance: [values[order[0]].max(0.0), second_var],
        projected,
    })
}
