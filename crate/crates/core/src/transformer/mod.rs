//! Minimal pre-layernorm decoder-only transformer that exposes every
//! per-layer, per-head attention map alongside next-token log-probabilities.

mod config;
mod dump;
mod forward;
mod weights;

pub use config::ModelConfig;
pub use dump::{dump_attention, DumpTargets};
pub use forward::{forward, ForwardOutput, TinyTransformer};
pub use weights::{load_weights, save_weights, tensor_layout, LayerWeights, Matrix, WeightBundle, WTSB_MAGIC};

use thiserror::Error;

use crate::data::DataError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("missing tensor {0:?}")]
    MissingTensor(String),
    #[error("tensor {name:?} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor {0:?} contains a non-finite value")]
    NonFiniteWeight(String),
    #[error("token id {id} at position {position} is outside vocabulary of size {vocab_size}")]
    TokenOutOfVocab {
        id: u32,
        position: usize,
        vocab_size: usize,
    },
    #[error("sequence of length {len} exceeds max_positions {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error(transparent)]
    Data(DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<DataError> for ModelError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::TokenOutOfVocab {
                id,
                position,
                vocab_size,
            } => ModelError::TokenOutOfVocab {
                id,
                position,
                vocab_size,
            },
            DataError::Io(io) => ModelError::Io(io),
            other => ModelError::Data(other),
        }
    }
}
