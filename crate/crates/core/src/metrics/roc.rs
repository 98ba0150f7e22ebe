use std::cmp::Ordering;

use super::MetricError;

/// Scores paired with binary membership labels (1 = member).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pairs: Vec<(f64, u8)>,
    n_pos: usize,
    n_neg: usize,
}

impl ScoreSet {
    pub fn new(pairs: Vec<(f64, u8)>) -> Result<Self, MetricError> {
        if pairs.iter().any(|(s, _)| !s.is_finite()) {
            return Err(MetricError::NonFinite);
        }
        let n_pos = pairs.iter().filter(|(_, l)| *l == 1).count();
        let n_neg = pairs.len() - n_pos;
        Ok(Self { pairs, n_pos, n_neg })
    }

    pub fn from_groups(positives: &[f64], negatives: &[f64]) -> Result<Self, MetricError> {
        let pairs = positives
            .iter()
            .map(|&s| (s, 1))
            .chain(negatives.iter().map(|&s| (s, 0)))
            .collect();
        Self::new(pairs)
    }

    pub fn pairs(&self) -> &[(f64, u8)] {
        &self.pairs
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    fn require_both(&self) -> Result<(), MetricError> {
        if self.n_pos == 0 || self.n_neg == 0 {
            return Err(MetricError::DegenerateClasses {
                n_pos: self.n_pos,
                n_neg: self.n_neg,
            });
        }
        Ok(())
    }

    /// Labels flipped (member ↔ non-member).
    pub fn flipped(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(s, l)| (s, 1 - l.min(1))).collect(),
            n_pos: self.n_neg,
            n_neg: self.n_pos,
        }
    }

    /// Groups of tied scores in descending score order, as (score, pos, neg).
    fn descending_groups(&self) -> Vec<(f64, usize, usize)> {
        let mut sorted = self.pairs.clone();
        sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
        let mut groups: Vec<(f64, usize, usize)> = Vec::new();
        for (s, l) in sorted {
            match groups.last_mut() {
                Some(g) if g.0 == s => {
                    if l == 1 {
                        g.1 += 1
                    } else {
                        g.2 += 1
                    }
                }
                _ => groups.push((s, (l == 1) as usize, (l != 1) as usize)),
            }
        }
        groups
    }
}

/// ROC AUC via the Mann–Whitney statistic with mid-ranks for ties.
pub fn roc_auc(scores: &ScoreSet) -> Result<f64, MetricError> {
    scores.require_both()?;
    // Twice the rank sum of positives, kept integral: a tie group occupying
    // ranks r+1..r+k has mid-rank (2r + k + 1) / 2.
    let mut groups = scores.descending_groups();
    groups.reverse();
    let mut rank_before = 0u64;
    let mut twice_rank_sum = 0u64;
    for (_, pos, neg) in groups {
        let k = (pos + neg) as u64;
        twice_rank_sum += pos as u64 * (2 * rank_before + k + 1);
        rank_before += k;
    }
    let n_pos = scores.n_pos as u64;
    let n_neg = scores.n_neg as u64;
    let twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    let denom = 2 * n_pos * n_neg;
    // Evaluate from the nearer end so that flipping labels gives exactly 1 - AUC.
    if 2 * twice_u <= denom {
        Ok(twice_u as f64 / denom as f64)
    } else {
        Ok(1.0 - (denom - twice_u) as f64 / denom as f64)
    }
}

/// Highest TPR among thresholds at observed scores whose FPR ≤ `fpr_cap`.
/// A sample is flagged as member when its score is ≥ the threshold.
pub fn tpr_at_fpr(scores: &ScoreSet, fpr_cap: f64) -> Result<f64, MetricError> {
    scores.require_both()?;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = 0.0f64;
    for (_, pos, neg) in scores.descending_groups() {
        tp += pos;
        fp += neg;
        let fpr = fp as f64 / scores.n_neg as f64;
        if fpr <= fpr_cap {
            best = best.max(tp as f64 / scores.n_pos as f64);
        } else {
            break;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points from `(+∞, 0, 0)` down to `(−∞, 1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// CSV with header `threshold,fpr,tpr`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
        }
        s
    }
}

pub fn roc_curve(scores: &ScoreSet) -> Result<RocCurve, MetricError> {
    scores.require_both()?;
    let (np, nn) = (scores.n_pos as f64, scores.n_neg as f64);
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (s, pos, neg) in scores.descending_groups() {
        tp += pos;
        fp += neg;
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / nn,
            tpr: tp as f64 / np,
        });
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    Ok(RocCurve { points })
}
