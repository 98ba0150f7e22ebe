use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::data::hash64_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    Concentration,
    TransCorr,
    TransFrob,
    TransKl,
    BaryMean,
    BaryVar,
    PertKlShift,
    PertConcDelta,
}

impl FeatureFamily {
    pub const TRANSITIONS: [FeatureFamily; 5] = [
        FeatureFamily::TransCorr,
        FeatureFamily::TransFrob,
        FeatureFamily::TransKl,
        FeatureFamily::BaryMean,
        FeatureFamily::BaryVar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureFamily::Concentration => "concentration",
            FeatureFamily::TransCorr => "trans_corr",
            FeatureFamily::TransFrob => "trans_frob",
            FeatureFamily::TransKl => "trans_kl",
            FeatureFamily::BaryMean => "bary_mean",
            FeatureFamily::BaryVar => "bary_var",
            FeatureFamily::PertKlShift => "pert_kl_shift",
            FeatureFamily::PertConcDelta => "pert_conc_delta",
        }
    }

    pub fn is_perturbation(self) -> bool {
        matches!(self, FeatureFamily::PertKlShift | FeatureFamily::PertConcDelta)
    }
}

impl fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One feature column. `layer` and `head` are 1-based; for transition
/// families `layer` names the lower layer of the (ℓ, ℓ+1) pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnDescriptor {
    pub family: FeatureFamily,
    pub layer: usize,
    pub head: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation_tag: Option<String>,
}

impl ColumnDescriptor {
    pub fn name(&self) -> String {
        match &self.perturbation_tag {
            Some(tag) => format!("{}.{}.l{}.h{}", self.family, tag, self.layer, self.head),
            None => format!("{}.l{}.h{}", self.family, self.layer, self.head),
        }
    }
}

/// Ordered, uniquely named feature columns plus their content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    columns: Vec<ColumnDescriptor>,
    schema_hash: String,
}

impl FeatureSchema {
    pub fn new(columns: Vec<ColumnDescriptor>) -> Result<Self, FeatureError> {
        let mut seen = HashSet::new();
        for c in &columns {
            let name = c.name();
            if !seen.insert(name.clone()) {
                return Err(FeatureError::SchemaCollision(name));
            }
        }
        let schema_hash = hash_columns(&columns);
        Ok(Self {
            columns,
            schema_hash,
        })
    }

    /// Concentration block (optional) followed by the five transition
    /// families, each layer-major then head-minor.
    pub fn transitional(layers: usize, heads: usize, include_concentration: bool) -> Self {
        let mut cols = Vec::new();
        if include_concentration {
            for l in 1..=layers {
                for h in 1..=heads {
                    cols.push(ColumnDescriptor {
                        family: FeatureFamily::Concentration,
                        layer: l,
                        head: h,
                        perturbation_tag: None,
                    });
                }
            }
        }
        for family in FeatureFamily::TRANSITIONS {
            for l in 1..layers {
                for h in 1..=heads {
                    cols.push(ColumnDescriptor {
                        family,
                        layer: l,
                        head: h,
                        perturbation_tag: None,
                    });
                }
            }
        }
        Self::new(cols).expect("generated names are unique")
    }

    /// Per spec tag: Δκ block then relative concentration delta block.
    pub fn perturbation(tags: &[String], layers: usize, heads: usize) -> Result<Self, FeatureError> {
        let mut cols = Vec::new();
        for tag in tags {
            for family in [FeatureFamily::PertKlShift, FeatureFamily::PertConcDelta] {
                for l in 1..=layers {
                    for h in 1..=heads {
                        cols.push(ColumnDescriptor {
                            family,
                            layer: l,
                            head: h,
                            perturbation_tag: Some(tag.clone()),
                        });
                    }
                }
            }
        }
        Self::new(cols)
    }

    pub fn concat(parts: &[&FeatureSchema]) -> Result<Self, FeatureError> {
        Self::new(parts.iter().flat_map(|s| s.columns.iter().cloned()).collect())
    }

    pub fn columns(&self) -> &[ColumnDescriptor] {
        &self.columns
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(ColumnDescriptor::name).collect()
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn hash(&self) -> &str {
        &self.schema_hash
    }

    /// Indices of the columns satisfying `keep`, and the reduced schema.
    pub fn select(&self, keep: impl Fn(&ColumnDescriptor) -> bool) -> (Vec<usize>, FeatureSchema) {
        let idx: Vec<usize> = (0..self.columns.len()).filter(|&i| keep(&self.columns[i])).collect();
        let cols = idx.iter().map(|&i| self.columns[i].clone()).collect();
        (idx, FeatureSchema::new(cols).expect("subset of unique names"))
    }
}

fn hash_columns(columns: &[ColumnDescriptor]) -> String {
    let joined = columns
        .iter()
        .map(ColumnDescriptor::name)
        .collect::<Vec<_>>()
        .join("\n");
    hash64_hex(joined.as_bytes())
}

/// Feature values for one sample, aligned to a schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub sample_id: String,
    pub values: Vec<f64>,
    pub schema_hash: String,
}
