use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{MlpModel, Standardizer};
use super::train::CvScore;
use super::ClassifierError;
use crate::data::manifest::{read_framed, write_framed};
use crate::data::DataError;

pub const MLPM_MAGIC: &[u8; 4] = b"MLPM";

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    layer_sizes: Vec<usize>,
    hidden_activation: String,
    output_activation: String,
    feature_names: Vec<String>,
    schema_hash: String,
    mean: Vec<f64>,
    std: Vec<f64>,
    seed: u64,
}

/// Writes "MLPM" | u16 version | u32 header length | JSON header | f32 LE
/// parameters (per layer `W[out][in]` then `b[out]`).
pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
    let header = ModelHeader {
        layer_sizes: model.layer_sizes().to_vec(),
        hidden_activation: "relu".into(),
        output_activation: "logistic".into(),
        feature_names: model.feature_names().to_vec(),
        schema_hash: model.schema_hash().to_string(),
        mean: model.standardizer().mean.clone(),
        std: model.standardizer().std.clone(),
        seed: model.seed(),
    };
    let mut out = BufWriter::new(File::create(path).map_err(DataError::from)?);
    write_framed(&mut out, MLPM_MAGIC, &header)?;
    for p in model.params() {
        out.write_all(&(*p as f32).to_le_bytes()).map_err(DataError::from)?;
    }
    out.flush().map_err(DataError::from)?;
    Ok(())
}

/// Reads a model written by [`save_model`]. Parameters come back rounded
/// to f32.
pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel, ClassifierError> {
    let file = File::open(path).map_err(DataError::from)?;
    let len = file.metadata().map_err(DataError::from)?.len();
    let mut input = BufReader::new(file);
    let (header, _): (ModelHeader, u64) = read_framed(&mut input, MLPM_MAGIC, len)?;
    if header.hidden_activation != "relu" || header.output_activation != "logistic" {
        return Err(ClassifierError::BadModel("unsupported activations".into()));
    }
    let mut payload = Vec::new();
    input.read_to_end(&mut payload).map_err(DataError::from)?;
    if payload.len() % 4 != 0 {
        return Err(ClassifierError::BadModel("payload is not a whole number of f32".into()));
    }
    let params: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect();
    let model = MlpModel::from_parts(
        header.layer_sizes,
        params,
        Standardizer {
            mean: header.mean,
            std: header.std,
        },
        header.feature_names,
        header.seed,
    )?;
    if model.schema_hash() != header.schema_hash {
        return Err(ClassifierError::BadModel("schema hash does not match feature names".into()));
    }
    Ok(model)
}

/// CSV with header `sample_id,fold,score,label`.
pub fn write_scores_csv(scores: &[CvScore], path: impl AsRef<Path>) -> Result<(), ClassifierError> {
    let mut out = BufWriter::new(File::create(path).map_err(DataError::from)?);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "sample_id,fold,score,label")?;
        for s in scores {
            writeln!(out, "{},{},{},{}", s.sample_id, s.fold, s.score, s.label)?;
        }
        out.flush()
    };
    write().map_err(DataError::from)?;
    Ok(())
}
