use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::shift::{concentration_delta, AttentionModel, PerturbedPair};
use super::spec::{apply_perturbation, PerturbationSpec};
use super::PerturbError;
use crate::data::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskingMode {
    /// Drop token i alone.
    Independent,
    /// Drop tokens 1..=i.
    Cumulative,
}

impl fmt::Display for MaskingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskingMode::Independent => "independent",
            MaskingMode::Cumulative => "cumulative",
        })
    }
}

impl FromStr for MaskingMode {
    type Err = PerturbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "independent" => Ok(Self::Independent),
            "cumulative" => Ok(Self::Cumulative),
            other => Err(PerturbError::InvalidSpec(format!("unknown masking mode {other:?}"))),
        }
    }
}

/// One flattened concentration-delta vector (layer-major, head-minor) per
/// step `i = 1..=k_max`.
pub fn masking_sweep<M: AttentionModel + ?Sized>(
    tokens: &TokenSequence,
    model: &M,
    mode: MaskingMode,
    k_max: usize,
) -> Result<Vec<Vec<f64>>, PerturbError> {
    let max = tokens.len() - 1;
    if k_max > max {
        return Err(PerturbError::KMaxTooLarge { k_max, max });
    }
    let original = model.attention(tokens)?;
    (1..=k_max)
        .map(|i| {
            let positions = match mode {
                MaskingMode::Independent => vec![i],
                MaskingMode::Cumulative => (1..=i).collect(),
            };
            let (ptokens, alignment) = apply_perturbation(tokens, &PerturbationSpec::drop(positions))?;
            let perturbed = model.attention(&ptokens)?;
            let pair = PerturbedPair::new(original.clone(), perturbed, alignment)?;
            let mut v = Vec::with_capacity(pair.layers() * pair.heads());
            for l in 1..=pair.layers() {
                for h in 1..=pair.heads() {
                    v.push(concentration_delta(&pair, l, h)?);
                }
            }
            Ok(v)
        })
        .collect()
}
