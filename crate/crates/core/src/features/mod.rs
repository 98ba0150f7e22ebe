//! Transitional attention features: per-head concentration (KL to uniform)
//! and adjacent-layer consistency and barycenter-drift statistics.

mod matrix;
mod ops;
mod schema;

pub use matrix::{aggregate_features, read_feature_cache, write_feature_cache, write_feature_csv, FeatureMatrix, FeatureSet};
pub use ops::{
    barycenter_drift, barycenter_row, consistency_corr, consistency_frob, consistency_kl,
    extract_transitional, kl_to_uniform, map_concentration, row_kl, TransitionalOptions, KL_FLOOR,
};
pub use schema::{ColumnDescriptor, FeatureFamily, FeatureSchema, FeatureVector};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("{what} index {index} out of range 1..={max}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        max: usize,
    },
    #[error("transitional features need at least 2 layers, stack has {0}")]
    TooFewLayers(usize),
    #[error("duplicate feature column {0:?}")]
    SchemaCollision(String),
    #[error("sample set mismatch: {0}")]
    SampleSetMismatch(String),
    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("feature vector for {sample:?} has {found} values, schema has {expected}")]
    LengthMismatch {
        sample: String,
        expected: usize,
        found: usize,
    },
    #[error("non-finite feature {column:?} for sample {sample:?}")]
    NonFinite { sample: String, column: String },
    #[error("malformed feature file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
