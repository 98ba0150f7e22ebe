use serde::{Deserialize, Serialize};

use super::ModelError;

fn default_eps() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    #[serde(rename = "layernorm_eps", default = "default_eps")]
    pub layernorm_epsilon: f64,
}

impl ModelConfig {
    pub fn new(
        n_layers: usize,
        n_heads: usize,
        d_model: usize,
        d_ff: usize,
        vocab_size: usize,
        max_positions: usize,
    ) -> Result<Self, ModelError> {
        let cfg = Self {
            n_layers,
            n_heads,
            d_model,
            d_ff,
            vocab_size,
            max_positions,
            layernorm_epsilon: default_eps(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let dims = [
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("d_model", self.d_model),
            ("d_ff", self.d_ff),
            ("vocab_size", self.vocab_size),
            ("max_positions", self.max_positions),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(ModelError::InvalidConfig(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(self.layernorm_epsilon > 0.0 && self.layernorm_epsilon.is_finite()) {
            return Err(ModelError::InvalidConfig("layernorm_eps must be positive".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Parameter count implied by the architecture; the unembedding adds
    /// `d_model * vocab_size` only when it is not tied to the token embedding.
    pub fn param_count(&self, tied_unembedding: bool) -> usize {
        let (d, f, v, p) = (self.d_model, self.d_ff, self.vocab_size, self.max_positions);
        let per_layer = 2 * d + 4 * d * d + 2 * d + d * f + f + f * d + d;
        let unembed = if tied_unembedding { 0 } else { d * v };
        v * d + p * d + self.n_layers * per_layer + 2 * d + unembed
    }
}
