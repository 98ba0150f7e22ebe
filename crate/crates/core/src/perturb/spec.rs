use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PerturbError;
use crate::data::TokenSequence;

/// splitmix64 generator. Replacement sampling is pinned to this exact
/// sequence so external exporters can reproduce perturbed inputs.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Replacement token for 1-based `position`: splitmix64 seeded with
/// `seed ^ position`, reduced modulo `vocab_size`, rejecting `original`.
pub fn replacement_id(seed: u64, position: usize, original: u32, vocab_size: usize) -> u32 {
    assert!(vocab_size >= 2, "replacement needs at least two vocabulary items");
    let mut rng = SplitMix64::new(seed ^ position as u64);
    loop {
        let id = (rng.next_u64() % vocab_size as u64) as u32;
        if id != original {
            return id;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Drop,
    Replace,
    Prefix,
}

impl PerturbationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationKind::Drop => "drop",
            PerturbationKind::Replace => "replace",
            PerturbationKind::Prefix => "prefix",
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerturbationKind {
    type Err = PerturbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "drop" => Ok(Self::Drop),
            "replace" => Ok(Self::Replace),
            "prefix" => Ok(Self::Prefix),
            other => Err(PerturbError::InvalidSpec(format!("unknown kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplacementSource {
    /// Draw from `0..vocab_size` with [`replacement_id`].
    Seeded { vocab_size: usize },
    /// One id per listed position.
    Explicit(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    /// 1-based, strictly increasing (drop and replace only).
    pub positions: Vec<usize>,
    pub replacement: ReplacementSource,
    pub prefix_tokens: Option<TokenSequence>,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn drop(positions: Vec<usize>) -> Self {
        Self {
            kind: PerturbationKind::Drop,
            positions,
            replacement: ReplacementSource::Explicit(vec![]),
            prefix_tokens: None,
            seed: 0,
        }
    }

    pub fn replace(positions: Vec<usize>, seed: u64, vocab_size: usize) -> Self {
        Self {
            kind: PerturbationKind::Replace,
            positions,
            replacement: ReplacementSource::Seeded { vocab_size },
            prefix_tokens: None,
            seed,
        }
    }

    pub fn replace_with(positions: Vec<usize>, ids: Vec<u32>) -> Self {
        Self {
            kind: PerturbationKind::Replace,
            positions,
            replacement: ReplacementSource::Explicit(ids),
            prefix_tokens: None,
            seed: 0,
        }
    }

    pub fn prefix(prefix: TokenSequence) -> Self {
        Self {
            kind: PerturbationKind::Prefix,
            positions: vec![],
            replacement: ReplacementSource::Explicit(vec![]),
            prefix_tokens: Some(prefix),
            seed: 0,
        }
    }

    fn check_positions(&self, len: usize) -> Result<(), PerturbError> {
        if self.positions.is_empty() {
            return Err(PerturbError::InvalidPositions("no positions given".into()));
        }
        let mut prev = 0usize;
        for &p in &self.positions {
            if p <= prev || p > len {
                return Err(PerturbError::InvalidPositions(format!(
                    "positions {:?} must be strictly increasing within 1..={len}",
                    self.positions
                )));
            }
            prev = p;
        }
        Ok(())
    }
}

/// Map from original token positions to perturbed positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// Indexed by 0-based original position; values are 0-based perturbed
    /// positions, `None` for removed tokens.
    images: Vec<Option<usize>>,
    perturbed_len: usize,
}

impl Alignment {
    pub fn new(images: Vec<Option<usize>>, perturbed_len: usize) -> Result<Self, PerturbError> {
        let mut seen = vec![false; perturbed_len];
        for img in images.iter().flatten() {
            if *img >= perturbed_len || seen[*img] {
                return Err(PerturbError::InvalidSpec(format!(
                    "alignment image {} is out of range or repeated",
                    img + 1
                )));
            }
            seen[*img] = true;
        }
        Ok(Self {
            images,
            perturbed_len,
        })
    }

    pub fn identity(len: usize) -> Self {
        Self {
            images: (0..len).map(Some).collect(),
            perturbed_len: len,
        }
    }

    pub fn original_len(&self) -> usize {
        self.images.len()
    }

    pub fn perturbed_len(&self) -> usize {
        self.perturbed_len
    }

    /// Image of 1-based original position `i` as a 1-based perturbed position.
    pub fn image(&self, i: usize) -> Option<usize> {
        self.images.get(i.wrapping_sub(1)).copied().flatten().map(|p| p + 1)
    }

    /// 0-based `(original, perturbed)` pairs in original order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.images
            .iter()
            .enumerate()
            .filter_map(|(i, img)| img.map(|p| (i, p)))
    }

    pub fn images(&self) -> &[Option<usize>] {
        &self.images
    }

    pub fn is_empty(&self) -> bool {
        self.images.iter().all(Option::is_none)
    }

    /// True when every original position maps to itself and lengths agree.
    pub fn is_identity(&self) -> bool {
        self.perturbed_len == self.images.len()
            && self.images.iter().enumerate().all(|(i, img)| *img == Some(i))
    }

    /// Restricts to original positions `< len`; the perturbed side is cut
    /// after the last surviving image.
    pub fn truncated(&self, len: usize) -> Alignment {
        let images: Vec<Option<usize>> = self.images.iter().take(len).copied().collect();
        let perturbed_len = images.iter().flatten().map(|p| p + 1).max().unwrap_or(0);
        Alignment {
            images,
            perturbed_len,
        }
    }
}

/// Applies `spec` to `tokens`, returning the perturbed sequence and the
/// position alignment.
pub fn apply_perturbation(
    tokens: &TokenSequence,
    spec: &PerturbationSpec,
) -> Result<(TokenSequence, Alignment), PerturbError> {
    let t = tokens.len();
    let ids = tokens.tokens();
    match spec.kind {
        PerturbationKind::Drop => {
            spec.check_positions(t)?;
            if spec.positions.len() >= t {
                return Err(PerturbError::EmptyResult);
            }
            let mut out = Vec::with_capacity(t - spec.positions.len());
            let mut images = Vec::with_capacity(t);
            let mut drop_iter = spec.positions.iter().peekable();
            for (i, &id) in ids.iter().enumerate() {
                if drop_iter.peek() == Some(&&(i + 1)) {
                    drop_iter.next();
                    images.push(None);
                } else {
                    images.push(Some(out.len()));
                    out.push(id);
                }
            }
            let n = out.len();
            Ok((TokenSequence::new(out)?, Alignment::new(images, n)?))
        }
        PerturbationKind::Replace => {
            spec.check_positions(t)?;
            let mut out = ids.to_vec();
            match &spec.replacement {
                ReplacementSource::Seeded { vocab_size } => {
                    if *vocab_size < 2 {
                        return Err(PerturbError::InvalidSpec(
                            "replacement needs a vocabulary of at least 2".into(),
                        ));
                    }
                    for &p in &spec.positions {
                        out[p - 1] = replacement_id(spec.seed, p, ids[p - 1], *vocab_size);
                    }
                }
                ReplacementSource::Explicit(new_ids) => {
                    if new_ids.len() != spec.positions.len() {
                        return Err(PerturbError::InvalidSpec(format!(
                            "{} replacement ids for {} positions",
                            new_ids.len(),
                            spec.positions.len()
                        )));
                    }
                    for (&p, &id) in spec.positions.iter().zip(new_ids) {
                        out[p - 1] = id;
                    }
                }
            }
            Ok((TokenSequence::new(out)?, Alignment::identity(t)))
        }
        PerturbationKind::Prefix => {
            let prefix = spec
                .prefix_tokens
                .as_ref()
                .ok_or_else(|| PerturbError::InvalidSpec("prefix perturbation without prefix tokens".into()))?;
            let shift = prefix.len();
            let mut out = prefix.tokens().to_vec();
            out.extend_from_slice(ids);
            let images = (0..t).map(|i| Some(i + shift)).collect();
            Ok((TokenSequence::new(out)?, Alignment::new(images, t + shift)?))
        }
    }
}
