use super::DataError;

/// Maximum allowed deviation of an attention row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-5;

/// All attention maps of one sample: `layers × heads` row-stochastic
/// `seq_len × seq_len` matrices stored row-major as `[layer][head][row][col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionStack {
    layers: usize,
    heads: usize,
    seq_len: usize,
    causal: bool,
    data: Vec<f32>,
}

/// Borrowed view of one `T × T` attention map.
#[derive(Debug, Clone, Copy)]
pub struct AttnMap<'a> {
    seq_len: usize,
    data: &'a [f32],
}

impl<'a> AttnMap<'a> {
    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    /// Row `i` (0-based).
    pub fn row(&self, i: usize) -> &'a [f32] {
        &self.data[i * self.seq_len..(i + 1) * self.seq_len]
    }

    /// Entry `(i, j)` (0-based), promoted to f64.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.seq_len + j] as f64
    }

    pub fn values(&self) -> &'a [f32] {
        self.data
    }
}

impl AttentionStack {
    /// Builds a stack from a flat row-major buffer. Only the shape is checked;
    /// call [`AttentionStack::validate`] for the stochasticity invariants.
    pub fn new(
        layers: usize,
        heads: usize,
        seq_len: usize,
        causal: bool,
        data: Vec<f32>,
    ) -> Result<Self, DataError> {
        if layers == 0 || heads == 0 || seq_len == 0 {
            return Err(DataError::InvalidShape(format!(
                "layers={layers}, heads={heads}, seq_len={seq_len} must all be positive"
            )));
        }
        let expected = layers * heads * seq_len * seq_len;
        if data.len() != expected {
            return Err(DataError::InvalidShape(format!(
                "buffer holds {} values, expected {expected}",
                data.len()
            )));
        }
        Ok(Self {
            layers,
            heads,
            seq_len,
            causal,
            data,
        })
    }

    /// Builds a stack by evaluating `f(layer, head, row, col)` (all 0-based).
    pub fn from_fn(
        layers: usize,
        heads: usize,
        seq_len: usize,
        causal: bool,
        mut f: impl FnMut(usize, usize, usize, usize) -> f32,
    ) -> Result<Self, DataError> {
        let mut data = Vec::with_capacity(layers * heads * seq_len * seq_len);
        for l in 0..layers {
            for h in 0..heads {
                for i in 0..seq_len {
                    for j in 0..seq_len {
                        data.push(f(l, h, i, j));
                    }
                }
            }
        }
        Self::new(layers, heads, seq_len, causal, data)
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn is_causal(&self) -> bool {
        self.causal
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// Number of f32 values in one map.
    pub fn map_len(&self) -> usize {
        self.seq_len * self.seq_len
    }

    /// Map for `(layer, head)`, 0-based.
    pub fn map(&self, layer: usize, head: usize) -> AttnMap<'_> {
        let n = self.map_len();
        let start = (layer * self.heads + head) * n;
        AttnMap {
            seq_len: self.seq_len,
            data: &self.data[start..start + n],
        }
    }

    /// Checks entry range, row sums, and causal zeros. Violations are reported
    /// with 1-based layer, head, and row indices.
    pub fn validate(&self, sample: &str) -> Result<(), DataError> {
        let t = self.seq_len;
        for l in 0..self.layers {
            for h in 0..self.heads {
                let map = self.map(l, h);
                for i in 0..t {
                    let row = map.row(i);
                    let corrupt = |detail: String| DataError::CorruptTensor {
                        sample: sample.to_string(),
                        layer: l + 1,
                        head: h + 1,
                        row: i + 1,
                        detail,
                    };
                    let mut sum = 0.0f64;
                    for (j, &v) in row.iter().enumerate() {
                        if !(0.0..=1.0).contains(&v) {
                            return Err(corrupt(format!("entry {} = {v} outside [0, 1]", j + 1)));
                        }
                        if self.causal && j > i && v != 0.0 {
                            return Err(corrupt(format!(
                                "causal entry {} = {v} is not exactly zero",
                                j + 1
                            )));
                        }
                        sum += v as f64;
                    }
                    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                        return Err(corrupt(format!("row sums to {sum:.8}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Restricts every map to its leading `len × len` block. Causal maps are
    /// already stochastic on that block; other maps are renormalized per row.
    pub fn truncated(&self, len: usize) -> AttentionStack {
        if len >= self.seq_len {
            return self.clone();
        }
        let len = len.max(1);
        let causal = self.causal;
        let src = self;
        let mut row_buf = vec![0.0f64; len];
        let mut data = Vec::with_capacity(self.layers * self.heads * len * len);
        for l in 0..self.layers {
            for h in 0..self.heads {
                let map = src.map(l, h);
                for i in 0..len {
                    let row = &map.row(i)[..len];
                    if causal {
                        data.extend_from_slice(row);
                        continue;
                    }
                    let mut sum = 0.0;
                    for (dst, &v) in row_buf.iter_mut().zip(row) {
                        *dst = v as f64;
                        sum += v as f64;
                    }
                    if sum > 0.0 {
                        data.extend(row_buf.iter().map(|v| (v / sum) as f32));
                    } else {
                        data.extend(std::iter::repeat_n(1.0 / len as f32, len));
                    }
                }
            }
        }
        AttentionStack {
            layers: self.layers,
            heads: self.heads,
            seq_len: len,
            causal,
            data,
        }
    }
}
