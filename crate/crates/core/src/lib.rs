//! Attention-based membership inference auditing for transformer language models.

pub mod baselines;
pub mod classifier;
pub mod data;
pub mod extraction;
pub mod features;
pub mod metrics;
pub mod perturb;
pub mod pipeline;
pub mod synth;
pub mod transformer;
