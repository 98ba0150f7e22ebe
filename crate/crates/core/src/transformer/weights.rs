use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError};

pub const WTSB_MAGIC: &[u8; 4] = b"WTSB";
const WTSB_VERSION: u16 = 1;

/// Dense row-major f64 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `out = x · self` for a row vector `x` of length `rows`.
    pub fn left_mul(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, &xv) in x.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(r)) {
                *o += xv * w;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub ln1_scale: Vec<f64>,
    pub ln1_bias: Vec<f64>,
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
    pub w_o: Matrix,
    pub ln2_scale: Vec<f64>,
    pub ln2_bias: Vec<f64>,
    pub mlp_w_in: Matrix,
    pub mlp_b_in: Vec<f64>,
    pub mlp_w_out: Matrix,
    pub mlp_b_out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightBundle {
    pub tok_emb: Matrix,
    pub pos_emb: Matrix,
    pub layers: Vec<LayerWeights>,
    pub lnf_scale: Vec<f64>,
    pub lnf_bias: Vec<f64>,
    /// `d_model × vocab_size`; `None` ties the unembedding to `tok_emb`.
    pub unembed: Option<Matrix>,
}

/// Canonical tensor names and shapes for `config`, in file order.
pub fn tensor_layout(config: &ModelConfig, tied: bool) -> Vec<(String, Vec<usize>)> {
    let (d, f, v, p) = (config.d_model, config.d_ff, config.vocab_size, config.max_positions);
    let mut out = vec![
        ("tok_emb".to_string(), vec![v, d]),
        ("pos_emb".to_string(), vec![p, d]),
    ];
    for l in 0..config.n_layers {
        let shapes: [(&str, Vec<usize>); 12] = [
            ("ln1.scale", vec![d]),
            ("ln1.bias", vec![d]),
            ("w_q", vec![d, d]),
            ("w_k", vec![d, d]),
            ("w_v", vec![d, d]),
            ("w_o", vec![d, d]),
            ("ln2.scale", vec![d]),
            ("ln2.bias", vec![d]),
            ("mlp.w_in", vec![d, f]),
            ("mlp.b_in", vec![f]),
            ("mlp.w_out", vec![f, d]),
            ("mlp.b_out", vec![d]),
        ];
        out.extend(shapes.into_iter().map(|(n, s)| (format!("layer.{l}.{n}"), s)));
    }
    out.push(("ln_f.scale".to_string(), vec![d]));
    out.push(("ln_f.bias".to_string(), vec![d]));
    if !tied {
        out.push(("unembed".to_string(), vec![d, v]));
    }
    out
}

impl WeightBundle {
    /// Seeded random weights: matrices uniform in ±`scale`, layernorm scales 1,
    /// biases 0. Used for fixtures and invariance tests.
    pub fn random(config: &ModelConfig, seed: u64, scale: f64, tied: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = HashMap::new();
        for (name, shape) in tensor_layout(config, tied) {
            let n: usize = shape.iter().product();
            let values: Vec<f64> = if name.ends_with(".scale") {
                vec![1.0; n]
            } else if name.contains("bias") || name.contains(".b_") {
                vec![0.0; n]
            } else {
                (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
            };
            tensors.insert(name, (shape, values));
        }
        Self::from_tensors(config, tensors).expect("layout is self-consistent")
    }

    fn from_tensors(
        config: &ModelConfig,
        mut tensors: HashMap<String, (Vec<usize>, Vec<f64>)>,
    ) -> Result<Self, ModelError> {
        let tied = !tensors.contains_key("unembed");
        let layout = tensor_layout(config, tied);
        for (name, shape) in &layout {
            let (found, values) = tensors
                .get(name)
                .ok_or_else(|| ModelError::MissingTensor(name.clone()))?;
            if found != shape {
                return Err(ModelError::ShapeMismatch {
                    name: name.clone(),
                    expected: shape.clone(),
                    found: found.clone(),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFiniteWeight(name.clone()));
            }
        }
        let mut take = |name: &str| -> (Vec<usize>, Vec<f64>) {
            tensors.remove(name).expect("checked above")
        };
        let mut mat = |name: &str| {
            let (shape, data) = take(name);
            Matrix {
                rows: shape[0],
                cols: shape[1],
                data,
            }
        };
        let tok_emb = mat("tok_emb");
        let pos_emb = mat("pos_emb");
        let unembed = if tied { None } else { Some(mat("unembed")) };
        let mut vector = |name: &str| take(name).1;
        let lnf_scale = vector("ln_f.scale");
        let lnf_bias = vector("ln_f.bias");
        let mut layers = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let p = |n: &str| format!("layer.{l}.{n}");
            let mut get = |n: &str| take(&p(n));
            let mut m = |n: &str| {
                let (shape, data) = get(n);
                Matrix {
                    rows: shape[0],
                    cols: shape[1],
                    data,
                }
            };
            let w_q = m("w_q");
            let w_k = m("w_k");
            let w_v = m("w_v");
            let w_o = m("w_o");
            let mlp_w_in = m("mlp.w_in");
            let mlp_w_out = m("mlp.w_out");
            let mut v = |n: &str| take(&p(n)).1;
            layers.push(LayerWeights {
                ln1_scale: v("ln1.scale"),
                ln1_bias: v("ln1.bias"),
                w_q,
                w_k,
                w_v,
                w_o,
                ln2_scale: v("ln2.scale"),
                ln2_bias: v("ln2.bias"),
                mlp_w_in,
                mlp_b_in: v("mlp.b_in"),
                mlp_w_out,
                mlp_b_out: v("mlp.b_out"),
            });
        }
        Ok(Self {
            tok_emb,
            pos_emb,
            layers,
            lnf_scale,
            lnf_bias,
            unembed,
        })
    }

    fn tensors_in_order(&self, config: &ModelConfig) -> Vec<(String, Vec<usize>, &[f64])> {
        let tied = self.unembed.is_none();
        let mut by_name: HashMap<String, &[f64]> = HashMap::new();
        by_name.insert("tok_emb".into(), &self.tok_emb.data);
        by_name.insert("pos_emb".into(), &self.pos_emb.data);
        for (l, lw) in self.layers.iter().enumerate() {
            let entries: [(&str, &[f64]); 12] = [
                ("ln1.scale", &lw.ln1_scale),
                ("ln1.bias", &lw.ln1_bias),
                ("w_q", &lw.w_q.data),
                ("w_k", &lw.w_k.data),
                ("w_v", &lw.w_v.data),
                ("w_o", &lw.w_o.data),
                ("ln2.scale", &lw.ln2_scale),
                ("ln2.bias", &lw.ln2_bias),
                ("mlp.w_in", &lw.mlp_w_in.data),
                ("mlp.b_in", &lw.mlp_b_in),
                ("mlp.w_out", &lw.mlp_w_out.data),
                ("mlp.b_out", &lw.mlp_b_out),
            ];
            for (n, v) in entries {
                by_name.insert(format!("layer.{l}.{n}"), v);
            }
        }
        by_name.insert("ln_f.scale".into(), &self.lnf_scale);
        by_name.insert("ln_f.bias".into(), &self.lnf_bias);
        if let Some(u) = &self.unembed {
            by_name.insert("unembed".into(), &u.data);
        }
        tensor_layout(config, tied)
            .into_iter()
            .map(|(name, shape)| {
                let data = by_name[&name];
                (name, shape, data)
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        let mut n = self.tok_emb.data.len() + self.pos_emb.data.len();
        n += self.lnf_scale.len() + self.lnf_bias.len();
        n += self.unembed.as_ref().map_or(0, |u| u.data.len());
        for lw in &self.layers {
            n += lw.ln1_scale.len() + lw.ln1_bias.len() + lw.ln2_scale.len() + lw.ln2_bias.len();
            n += lw.w_q.data.len() + lw.w_k.data.len() + lw.w_v.data.len() + lw.w_o.data.len();
            n += lw.mlp_w_in.data.len() + lw.mlp_b_in.len();
            n += lw.mlp_w_out.data.len() + lw.mlp_b_out.len();
        }
        n
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorIndexEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct WtsbHeader {
    n_layers: usize,
    n_heads: usize,
    d_model: usize,
    d_ff: usize,
    vocab_size: usize,
    max_positions: usize,
    layernorm_eps: f64,
    tensor_index: Vec<TensorIndexEntry>,
}

/// Writes weights in the WTSB layout: magic, version, JSON config with a
/// tensor index (byte offsets relative to the payload), then raw LE f32 data.
pub fn save_weights(
    config: &ModelConfig,
    weights: &WeightBundle,
    path: impl AsRef<Path>,
) -> Result<(), ModelError> {
    let tensors = weights.tensors_in_order(config);
    let mut offset = 0u64;
    let tensor_index = tensors
        .iter()
        .map(|(name, shape, data)| {
            let e = TensorIndexEntry {
                name: name.clone(),
                shape: shape.clone(),
                offset,
            };
            offset += (data.len() * 4) as u64;
            e
        })
        .collect();
    let header = WtsbHeader {
        n_layers: config.n_layers,
        n_heads: config.n_heads,
        d_model: config.d_model,
        d_ff: config.d_ff,
        vocab_size: config.vocab_size,
        max_positions: config.max_positions,
        layernorm_eps: config.layernorm_epsilon,
        tensor_index,
    };
    let json = serde_json::to_vec(&header).map_err(|e| ModelError::InvalidConfig(e.to_string()))?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(WTSB_MAGIC)?;
    out.write_all(&WTSB_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    for (_, _, data) in tensors {
        for &v in data {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<(ModelConfig, WeightBundle), ModelError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let bad = |msg: String| ModelError::InvalidConfig(msg);
    if bytes.len() < 10 {
        return Err(bad("file too short for a WTSB header".into()));
    }
    if &bytes[..4] != WTSB_MAGIC {
        return Err(bad(format!(
            "bad magic {:?}, expected \"WTSB\"",
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != WTSB_VERSION {
        return Err(bad(format!("unsupported WTSB version {version}")));
    }
    let header_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    let payload_start = 10 + header_len;
    if bytes.len() < payload_start {
        return Err(bad("truncated WTSB header".into()));
    }
    let header: WtsbHeader =
        serde_json::from_slice(&bytes[10..payload_start]).map_err(|e| bad(e.to_string()))?;
    let config = ModelConfig {
        n_layers: header.n_layers,
        n_heads: header.n_heads,
        d_model: header.d_model,
        d_ff: header.d_ff,
        vocab_size: header.vocab_size,
        max_positions: header.max_positions,
        layernorm_epsilon: header.layernorm_eps,
    };
    config.validate()?;
    let payload = &bytes[payload_start..];
    let mut tensors = HashMap::new();
    for entry in header.tensor_index {
        let n: usize = entry.shape.iter().product();
        let start = entry.offset as usize;
        let end = start + n * 4;
        if end > payload.len() {
            return Err(bad(format!("tensor {:?} extends past end of file", entry.name)));
        }
        let values = payload[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        tensors.insert(entry.name, (entry.shape, values));
    }
    let weights = WeightBundle::from_tensors(&config, tensors)?;
    Ok((config, weights))
}
