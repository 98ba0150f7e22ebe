//! Output-based reference attacks on token log-probs. Every score has a raw
//! value and an oriented value where higher means more member-like.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use flate2::write::ZlibEncoder;
use flate2::Compression;
use serde::Serialize;
use thiserror::Error;

use crate::data::{DataError, LogProbRecord};

pub const ZLIB_LEVEL: u32 = 6;
pub const DEFAULT_MIN_K: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("record {0:?} has no token log-probs")]
    EmptyRecord(String),
    #[error("text is empty")]
    EmptyText,
    #[error("k_percent {0} outside (0, 100]")]
    InvalidK(f64),
    #[error("records differ: {0}")]
    LengthMismatch(String),
    #[error("missing required record {0}")]
    MissingRequiredRecord(&'static str),
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Loss,
    Ppl,
    Zlib,
    MinK,
    Ref,
    PplXl,
    PplLower,
    RatioSXl,
    RatioLowerXl,
    ZlibEntropy,
    RatioZlibXl,
}

impl BaselineMethod {
    pub fn tag(self) -> &'static str {
        match self {
            BaselineMethod::Loss => "loss",
            BaselineMethod::Ppl => "ppl",
            BaselineMethod::Zlib => "zlib",
            BaselineMethod::MinK => "min_k",
            BaselineMethod::Ref => "ref",
            BaselineMethod::PplXl => "ppl_xl",
            BaselineMethod::PplLower => "ppl_lower",
            BaselineMethod::RatioSXl => "ratio_s_xl",
            BaselineMethod::RatioLowerXl => "ratio_lower_xl",
            BaselineMethod::ZlibEntropy => "zlib_entropy",
            BaselineMethod::RatioZlibXl => "ratio_zlib_xl",
        }
    }

    /// +1 when a larger raw value is more member-like, −1 otherwise.
    pub fn orientation(self) -> f64 {
        match self {
            BaselineMethod::MinK | BaselineMethod::RatioSXl | BaselineMethod::RatioLowerXl => 1.0,
            _ => -1.0,
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineScore {
    pub sample_id: String,
    pub method: BaselineMethod,
    pub raw: f64,
    pub oriented: f64,
}

impl BaselineScore {
    fn new(sample_id: &str, method: BaselineMethod, raw: f64) -> Self {
        Self {
            sample_id: sample_id.to_string(),
            method,
            raw,
            oriented: method.orientation() * raw,
        }
    }
}

fn mean_loss(rec: &LogProbRecord) -> Result<f64, BaselineError> {
    if rec.token_logprobs.is_empty() {
        return Err(BaselineError::EmptyRecord(rec.sample_id.clone()));
    }
    let sum: f64 = rec.token_logprobs.iter().map(|&v| v as f64).sum();
    Ok(-sum / rec.token_logprobs.len() as f64)
}

/// Mean negative token log-prob.
pub fn loss_score(rec: &LogProbRecord) -> Result<BaselineScore, BaselineError> {
    Ok(BaselineScore::new(&rec.sample_id, BaselineMethod::Loss, mean_loss(rec)?))
}

/// `exp(loss)`.
pub fn ppl_score(rec: &LogProbRecord) -> Result<BaselineScore, BaselineError> {
    Ok(BaselineScore::new(&rec.sample_id, BaselineMethod::Ppl, mean_loss(rec)?.exp()))
}

/// Byte length of the zlib stream (level 6) of the UTF-8 text.
pub fn zlib_entropy(text: &str) -> Result<usize, BaselineError> {
    if text.is_empty() {
        return Err(BaselineError::EmptyText);
    }
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::new(ZLIB_LEVEL));
    enc.write_all(text.as_bytes()).expect("in-memory write");
    Ok(enc.finish().expect("in-memory write").len())
}

/// Summed token loss divided by [`zlib_entropy`] of `text`.
pub fn zlib_score(rec: &LogProbRecord, text: &str) -> Result<BaselineScore, BaselineError> {
    let z = zlib_entropy(text)?;
    if rec.token_logprobs.is_empty() {
        return Err(BaselineError::EmptyRecord(rec.sample_id.clone()));
    }
    let total: f64 = -rec.token_logprobs.iter().map(|&v| v as f64).sum::<f64>();
    Ok(BaselineScore::new(&rec.sample_id, BaselineMethod::Zlib, total / z as f64))
}

/// Mean of the `max(1, floor(k/100 · n))` smallest log-probs.
pub fn min_k_score(rec: &LogProbRecord, k_percent: f64) -> Result<BaselineScore, BaselineError> {
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(BaselineError::InvalidK(k_percent));
    }
    let n = rec.token_logprobs.len();
    if n == 0 {
        return Err(BaselineError::EmptyRecord(rec.sample_id.clone()));
    }
    let m = ((k_percent * n as f64 / 100.0).floor() as usize).clamp(1, n);
    let mut v: Vec<f64> = rec.token_logprobs.iter().map(|&x| x as f64).collect();
    v.sort_by(f64::total_cmp);
    let raw = v[..m].iter().sum::<f64>() / m as f64;
    Ok(BaselineScore::new(&rec.sample_id, BaselineMethod::MinK, raw))
}

/// Target loss minus reference loss.
pub fn ref_score(target: &LogProbRecord, reference: &LogProbRecord) -> Result<BaselineScore, BaselineError> {
    if target.sample_id != reference.sample_id || target.token_logprobs.len() != reference.token_logprobs.len() {
        return Err(BaselineError::LengthMismatch(format!(
            "{:?} ({} tokens) vs {:?} ({} tokens)",
            target.sample_id,
            target.token_logprobs.len(),
            reference.sample_id,
            reference.token_logprobs.len()
        )));
    }
    let raw = mean_loss(target)? - mean_loss(reference)?;
    Ok(BaselineScore::new(&target.sample_id, BaselineMethod::Ref, raw))
}

/// Extraction-ranking scores for one generation. Scores that need `small`
/// or `lower` are omitted when those records are absent.
pub fn extraction_baselines(
    xl: Option<&LogProbRecord>,
    small: Option<&LogProbRecord>,
    lower: Option<&LogProbRecord>,
    text: &str,
) -> Result<Vec<BaselineScore>, BaselineError> {
    let xl = xl.ok_or(BaselineError::MissingRequiredRecord("xl"))?;
    let id = xl.sample_id.as_str();
    let log_ppl_xl = mean_loss(xl)?;
    let z = zlib_entropy(text)? as f64;
    let mut out = vec![BaselineScore::new(id, BaselineMethod::PplXl, log_ppl_xl.exp())];
    if let Some(lo) = lower {
        out.push(BaselineScore::new(id, BaselineMethod::PplLower, mean_loss(lo)?.exp()));
    }
    if (small.is_some() || lower.is_some()) && log_ppl_xl == 0.0 {
        return Err(BaselineError::ZeroDenominator("log ppl(xl)"));
    }
    if let Some(s) = small {
        out.push(BaselineScore::new(id, BaselineMethod::RatioSXl, mean_loss(s)? / log_ppl_xl));
    }
    if let Some(lo) = lower {
        out.push(BaselineScore::new(id, BaselineMethod::RatioLowerXl, mean_loss(lo)? / log_ppl_xl));
    }
    out.push(BaselineScore::new(id, BaselineMethod::ZlibEntropy, z));
    out.push(BaselineScore::new(id, BaselineMethod::RatioZlibXl, log_ppl_xl / z));
    Ok(out)
}

/// CSV with header `sample_id,method,raw,oriented`.
pub fn write_baseline_csv(scores: &[BaselineScore], path: impl AsRef<Path>) -> Result<(), DataError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "sample_id,method,raw,oriented")?;
    for s in scores {
        writeln!(out, "{},{},{},{}", s.sample_id, s.method, s.raw, s.oriented)?;
    }
    out.flush()?;
    Ok(())
}
