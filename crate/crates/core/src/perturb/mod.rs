//! Input perturbations (token drop, token replacement, prefix insertion) and
//! the attention-shift features measured between a sample and its perturbed
//! counterpart.

mod dump;
mod plan;
mod shift;
mod spec;
mod sweep;

pub use dump::{decode_alignment, dump_perturbed, encode_alignment, pairs_from_dumps, perturbed_id};
pub use plan::{evenly_spaced, PerturbationPlan, PlanSpec, DEFAULT_DROP_COUNT, DEFAULT_REPLACE_COUNT};
pub use shift::{
    concentration_delta, extract_perturbation_features, kl_shift, pair_features, AttentionModel, PerturbedPair,
};
pub use spec::{
    apply_perturbation, replacement_id, Alignment, PerturbationKind, PerturbationSpec, ReplacementSource,
    SplitMix64,
};
pub use sweep::{masking_sweep, MaskingMode};

use thiserror::Error;

use crate::data::DataError;
use crate::features::FeatureError;
use crate::transformer::ModelError;

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("invalid positions: {0}")]
    InvalidPositions(String),
    #[error("perturbation would leave an empty sequence")]
    EmptyResult,
    #[error("alignment maps no original token into the perturbed sequence")]
    EmptyAlignment,
    #[error("k_max {k_max} exceeds T-1 = {max}")]
    KMaxTooLarge { k_max: usize, max: usize },
    #[error("invalid perturbation spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no perturbed stacks for sample {0:?}")]
    MissingPerturbed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Data(#[from] DataError),
}
