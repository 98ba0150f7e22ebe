use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::spec::{PerturbationKind, PerturbationSpec, ReplacementSource};
use super::PerturbError;
use crate::data::{DataError, TokenSequence};

pub const DEFAULT_DROP_COUNT: usize = 7;
pub const DEFAULT_REPLACE_COUNT: usize = 7;

/// One entry of a plan file. Positions are either listed explicitly or
/// derived per sample from `count` with [`evenly_spaced`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSpec {
    pub kind: PerturbationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix_id: Option<String>,
}

/// JSON plan: `{"specs": [...], "prefixes": {"id": [tokens]}}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerturbationPlan {
    pub specs: Vec<PlanSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub prefixes: BTreeMap<String, Vec<u32>>,
}

/// `n' = min(n, limit)` positions `floor(k*T/n') + 1`, k = 0..n', where the
/// limit is `T-1` for drops and `T` otherwise.
pub fn evenly_spaced(seq_len: usize, n: usize, kind: PerturbationKind) -> Vec<usize> {
    let limit = match kind {
        PerturbationKind::Drop => seq_len.saturating_sub(1),
        _ => seq_len,
    };
    let n = n.min(limit);
    (0..n).map(|k| k * seq_len / n + 1).collect()
}

impl PerturbationPlan {
    /// Drop 7, replace 7 and, when given, one prefix insertion.
    pub fn default_plan(seed: u64, prefix_id: Option<String>) -> Self {
        let mut specs = vec![
            PlanSpec {
                kind: PerturbationKind::Drop,
                positions: None,
                count: Some(DEFAULT_DROP_COUNT),
                seed,
                prefix_id: None,
            },
            PlanSpec {
                kind: PerturbationKind::Replace,
                positions: None,
                count: Some(DEFAULT_REPLACE_COUNT),
                seed,
                prefix_id: None,
            },
        ];
        if let Some(id) = prefix_id {
            specs.push(PlanSpec {
                kind: PerturbationKind::Prefix,
                positions: None,
                count: None,
                seed,
                prefix_id: Some(id),
            });
        }
        Self {
            specs,
            prefixes: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, PerturbError> {
        let text = std::fs::read_to_string(path).map_err(DataError::from)?;
        let plan: Self = serde_json::from_str(&text)
            .map_err(|e| PerturbError::InvalidSpec(format!("{}: {e}", path.display())))?;
        plan.check()?;
        Ok(plan)
    }

    pub fn save(&self, path: &Path) -> Result<(), PerturbError> {
        let mut text = serde_json::to_string_pretty(self).expect("plan serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(DataError::from)?;
        Ok(())
    }

    pub fn check(&self) -> Result<(), PerturbError> {
        if self.specs.is_empty() {
            return Err(PerturbError::InvalidSpec("plan has no specs".into()));
        }
        for (k, s) in self.specs.iter().enumerate() {
            match s.kind {
                PerturbationKind::Prefix => {
                    if s.prefix_id.is_none() {
                        return Err(PerturbError::InvalidSpec(format!("spec {k}: prefix without prefix_id")));
                    }
                }
                _ => {
                    if s.positions.is_none() && s.count.is_none() {
                        return Err(PerturbError::InvalidSpec(format!(
                            "spec {k}: {} needs positions or count",
                            s.kind
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Column tag for spec `k`.
    pub fn tag(&self, k: usize) -> String {
        format!("s{k}-{}", self.specs[k].kind)
    }

    pub fn tags(&self) -> Vec<String> {
        (0..self.specs.len()).map(|k| self.tag(k)).collect()
    }

    /// Concrete specs for a sequence of `seq_len` tokens. Prefix ids are
    /// looked up in the plan first, then in `external`.
    pub fn resolve(
        &self,
        seq_len: usize,
        vocab_size: usize,
        external: &BTreeMap<String, TokenSequence>,
    ) -> Result<Vec<PerturbationSpec>, PerturbError> {
        self.specs
            .iter()
            .map(|s| match s.kind {
                PerturbationKind::Prefix => {
                    let id = s.prefix_id.as_deref().unwrap_or_default();
                    let prefix = match self.prefixes.get(id) {
                        Some(tokens) => TokenSequence::new(tokens.clone())?,
                        None => external
                            .get(id)
                            .cloned()
                            .ok_or_else(|| PerturbError::InvalidSpec(format!("unknown prefix_id {id:?}")))?,
                    };
                    let mut spec = PerturbationSpec::prefix(prefix);
                    spec.seed = s.seed;
                    Ok(spec)
                }
                kind => {
                    let positions = match (&s.positions, s.count) {
                        (Some(p), _) => p.clone(),
                        (None, Some(n)) => evenly_spaced(seq_len, n, kind),
                        (None, None) => {
                            return Err(PerturbError::InvalidSpec(format!("{kind} needs positions or count")))
                        }
                    };
                    let mut spec = PerturbationSpec::drop(positions);
                    spec.kind = kind;
                    spec.seed = s.seed;
                    if kind == PerturbationKind::Replace {
                        spec.replacement = ReplacementSource::Seeded { vocab_size };
                    }
                    Ok(spec)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evenly_spaced_positions() {
        assert_eq!(evenly_spaced(16, 7, PerturbationKind::Drop), vec![1, 3, 5, 7, 10, 12, 14]);
        assert_eq!(evenly_spaced(10, 7, PerturbationKind::Drop).len(), 7);
        assert_eq!(evenly_spaced(4, 7, PerturbationKind::Drop), vec![1, 2, 3]);
        assert_eq!(evenly_spaced(4, 7, PerturbationKind::Replace), vec![1, 2, 3, 4]);
        assert!(evenly_spaced(1, 7, PerturbationKind::Drop).is_empty());
    }

    #[test]
    fn plan_json_round_trip() {
        let mut plan = PerturbationPlan::default_plan(5, Some("p0".into()));
        plan.prefixes.insert("p0".into(), vec![1, 2, 3]);
        let json = serde_json::to_string(&plan).unwrap();
        assert!(json.contains("\"kind\":\"drop\""));
        let back: PerturbationPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, plan);
        let specs = back.resolve(10, 50, &BTreeMap::new()).unwrap();
        assert_eq!(specs.len(), 3);
        assert_eq!(specs[2].prefix_tokens.as_ref().unwrap().tokens(), &[1, 2, 3]);
        assert_eq!(back.tags(), vec!["s0-drop", "s1-replace", "s2-prefix"]);
    }

    #[test]
    fn minimal_external_plan_parses() {
        let plan: PerturbationPlan =
            serde_json::from_str(r#"{"specs":[{"kind":"replace","positions":[2,4],"seed":9,"prefix_id":null}]}"#)
                .unwrap();
        plan.check().unwrap();
        let specs = plan.resolve(5, 100, &BTreeMap::new()).unwrap();
        assert_eq!(specs[0].positions, vec![2, 4]);
        assert_eq!(specs[0].replacement, ReplacementSource::Seeded { vocab_size: 100 });
    }

    #[test]
    fn unknown_prefix_rejected() {
        let plan = PerturbationPlan::default_plan(0, Some("missing".into()));
        assert!(plan.resolve(8, 10, &BTreeMap::new()).is_err());
    }
}
