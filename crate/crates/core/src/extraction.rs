//! Ranking of model generations by memorization likelihood: score candidate
//! continuations with output baselines and the attention classifier, then
//! correlate each score with ROUGE-L against the true continuation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{extraction_baselines, BaselineError, ZLIB_LEVEL};
use crate::classifier::{ClassifierError, MlpModel};
use crate::data::{read_logprob_dump, AttentionDump, DataError, LogProbRecord};
use crate::metrics::{pearson, rouge_l_text};
use crate::perturb::PerturbationPlan;
use crate::pipeline::{sample_features, FeatureOptions, PipelineError};

pub const ATTENMIA_METHOD: &str = "attenmia";

/// Score columns in table order.
pub const EXTRACTION_METHODS: [&str; 7] = [
    "ppl_xl",
    "ppl_lower",
    "ratio_s_xl",
    "ratio_lower_xl",
    "zlib_entropy",
    "ratio_zlib_xl",
    ATTENMIA_METHOD,
];

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("corpus line {line}: {message}")]
    BadCorpus { line: usize, message: String },
    #[error("duplicate candidate id {0:?}")]
    DuplicateCandidate(String),
    #[error("candidate {candidate:?}: no record in {which} dump")]
    MissingDump { candidate: String, which: &'static str },
    #[error("model expects feature {0:?}, which the dumps do not provide")]
    SchemaMismatch(String),
    #[error("perturbed dump has {found} specs for {candidate:?}, plan has {expected}")]
    PlanMismatch { candidate: String, expected: usize, found: usize },
    #[error("selection of {requested} exceeds corpus size {available}")]
    SelectionTooLarge { requested: usize, available: usize },
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateDumps {
    pub xl: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub small: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<String>,
    pub attn: String,
    pub attn_perturbed: String,
}

/// One JSON line of a candidate corpus. Dump paths are relative to the
/// corpus file; records inside dumps are keyed by the candidate id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: String,
    pub prefix: String,
    pub generation: String,
    pub reference: String,
    pub dumps: CandidateDumps,
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<CandidateRecord>, ExtractionError> {
    let reader = BufReader::new(File::open(path).map_err(DataError::from)?);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(DataError::from)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CandidateRecord = serde_json::from_str(&line).map_err(|e| ExtractionError::BadCorpus {
            line: n + 1,
            message: e.to_string(),
        })?;
        if rec.generation.is_empty() || rec.reference.is_empty() {
            return Err(ExtractionError::BadCorpus {
                line: n + 1,
                message: "generation and reference must be non-empty".into(),
            });
        }
        if !seen.insert(rec.id.clone()) {
            return Err(ExtractionError::DuplicateCandidate(rec.id));
        }
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub candidate_id: String,
    /// Aligned with [`EXTRACTION_METHODS`]; `None` when the inputs for a
    /// score are absent.
    pub scores: Vec<Option<f64>>,
    pub rouge_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreTable {
    pub methods: Vec<String>,
    pub rows: Vec<ScoreRow>,
}

fn options_for(model: &MlpModel, max_len: Option<usize>) -> FeatureOptions {
    let names = model.feature_names();
    let has = |p: &str| names.iter().any(|n| n.starts_with(p));
    FeatureOptions {
        concentration: has("concentration."),
        transitional: has("trans_") || has("bary_"),
        perturbation: has("pert_"),
        layers: None,
        max_len,
    }
}

type LogProbIndex = HashMap<String, LogProbRecord>;

fn load_lgpd(cache: &mut BTreeMap<PathBuf, LogProbIndex>, path: PathBuf) -> Result<(), DataError> {
    if let std::collections::btree_map::Entry::Vacant(slot) = cache.entry(path) {
        let recs = read_logprob_dump(slot.key())?;
        slot.insert(recs.into_iter().map(|r| (r.sample_id.clone(), r)).collect());
    }
    Ok(())
}

/// Scores every candidate with the extraction baselines and the classifier
/// probability. When `plan` is given, each candidate must have exactly one
/// perturbed stack per plan spec.
pub fn score_corpus(
    records: &[CandidateRecord],
    model: &MlpModel,
    plan: Option<&PerturbationPlan>,
    base_dir: &Path,
    max_len: Option<usize>,
) -> Result<ScoreTable, ExtractionError> {
    let resolve = |p: &str| base_dir.join(p);
    let mut lgpd: BTreeMap<PathBuf, LogProbIndex> = BTreeMap::new();
    let mut atnd: BTreeMap<PathBuf, AttentionDump> = BTreeMap::new();
    for r in records {
        let d = &r.dumps;
        for p in [Some(&d.xl), d.small.as_ref(), d.lower.as_ref()].into_iter().flatten() {
            load_lgpd(&mut lgpd, resolve(p))?;
        }
        for p in [&d.attn, &d.attn_perturbed] {
            if let std::collections::btree_map::Entry::Vacant(slot) = atnd.entry(resolve(p)) {
                let dump = AttentionDump::open(slot.key())?;
                slot.insert(dump);
            }
        }
    }
    let opts = options_for(model, max_len);
    let rows = records
        .par_iter()
        .map(|r| {
            let d = &r.dumps;
            let get = |p: &Option<String>, which: &'static str| -> Result<Option<&LogProbRecord>, ExtractionError> {
                match p {
                    None => Ok(None),
                    Some(p) => lgpd[&resolve(p)]
                        .get(&r.id)
                        .map(Some)
                        .ok_or(ExtractionError::MissingDump {
                            candidate: r.id.clone(),
                            which,
                        }),
                }
            };
            let xl = get(&Some(d.xl.clone()), "xl")?;
            let small = get(&d.small, "small")?;
            let lower = get(&d.lower, "lower")?;
            let base = extraction_baselines(xl, small, lower, &r.generation)?;

            let attn = &atnd[&resolve(&d.attn)];
            let pert = &atnd[&resolve(&d.attn_perturbed)];
            if !attn.contains(&r.id) {
                return Err(ExtractionError::MissingDump {
                    candidate: r.id.clone(),
                    which: "attn",
                });
            }
            if let Some(plan) = plan {
                let found = (0..).take_while(|k| pert.contains(&format!("{}#{k}", r.id))).count();
                if found != plan.specs.len() {
                    return Err(ExtractionError::PlanMismatch {
                        candidate: r.id.clone(),
                        expected: plan.specs.len(),
                        found,
                    });
                }
            }
            let (schema, vector) = sample_features(attn, Some(pert), &r.id, &opts)?;
            let index: HashMap<String, usize> = schema.names().into_iter().enumerate().map(|(i, n)| (n, i)).collect();
            let x: Vec<f64> = model
                .feature_names()
                .iter()
                .map(|n| {
                    index
                        .get(n)
                        .map(|&i| vector.values[i])
                        .ok_or_else(|| ExtractionError::SchemaMismatch(n.clone()))
                })
                .collect::<Result<_, _>>()?;
            let mut scores = vec![None; EXTRACTION_METHODS.len()];
            for s in &base {
                let col = EXTRACTION_METHODS.iter().position(|m| *m == s.method.tag()).expect("known method");
                scores[col] = Some(s.raw);
            }
            scores[EXTRACTION_METHODS.len() - 1] = Some(model.probability(&x));
            Ok(ScoreRow {
                candidate_id: r.id.clone(),
                scores,
                rouge_l: rouge_l_text(&r.generation, &r.reference).f1,
            })
        })
        .collect::<Result<Vec<_>, ExtractionError>>()?;
    Ok(ScoreTable {
        methods: EXTRACTION_METHODS.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedRow {
    pub candidate_id: String,
    /// 1-based position by ROUGE-L descending, ties by candidate id.
    pub rank: usize,
    pub rouge_l: f64,
    pub selected: bool,
    pub scores: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub top_n: usize,
    pub bottom_n: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingReport {
    pub n_candidates: usize,
    pub selection: Selection,
    pub methods: Vec<String>,
    /// Pearson r of each method against ROUGE-L on the selection; `None`
    /// when fewer than two selected candidates carry the score.
    pub method_r: BTreeMap<String, Option<f64>>,
    pub zlib_level: u32,
    pub rows: Vec<RankedRow>,
}

/// Orders candidates by ROUGE-L (descending, ties by id ascending), selects
/// the first `top_n` and last `bottom_n`, and correlates every method with
/// ROUGE-L on that selection.
pub fn evaluate_ranking(table: &ScoreTable, top_n: usize, bottom_n: usize) -> Result<RankingReport, ExtractionError> {
    let n = table.rows.len();
    if top_n + bottom_n > n {
        return Err(ExtractionError::SelectionTooLarge {
            requested: top_n + bottom_n,
            available: n,
        });
    }
    let mut order: Vec<&ScoreRow> = table.rows.iter().collect();
    order.sort_by(|a, b| {
        b.rouge_l
            .total_cmp(&a.rouge_l)
            .then_with(|| a.candidate_id.cmp(&b.candidate_id))
    });
    let rows: Vec<RankedRow> = order
        .iter()
        .enumerate()
        .map(|(k, r)| RankedRow {
            candidate_id: r.candidate_id.clone(),
            rank: k + 1,
            rouge_l: r.rouge_l,
            selected: k < top_n || k >= n - bottom_n,
            scores: r.scores.clone(),
        })
        .collect();
    let mut method_r = BTreeMap::new();
    for (m, name) in table.methods.iter().enumerate() {
        let (s, g): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.selected)
            .filter_map(|r| r.scores[m].map(|v| (v, r.rouge_l)))
            .unzip();
        method_r.insert(name.clone(), (s.len() >= 2).then(|| pearson(&s, &g)));
    }
    Ok(RankingReport {
        n_candidates: n,
        selection: Selection {
            top_n,
            bottom_n,
            size: top_n + bottom_n,
        },
        methods: table.methods.clone(),
        method_r,
        zlib_level: ZLIB_LEVEL,
        rows,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ScoreTable {
    /// CSV `candidate_id,rouge_l,<methods>`; absent scores are empty cells.
    pub fn to_csv(&self) -> String {
        let mut s = format!("candidate_id,rouge_l,{}\n", self.methods.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.scores.iter().map(|&v| cell(v)).collect();
            s.push_str(&format!("{},{},{}\n", r.candidate_id, r.rouge_l, cells.join(",")));
        }
        s
    }
}

impl RankingReport {
    /// CSV `candidate_id,rank,rouge_l,selected,<methods>` in rank order.
    pub fn to_csv(&self) -> String {
        let mut s = format!("candidate_id,rank,rouge_l,selected,{}\n", self.methods.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.scores.iter().map(|&v| cell(v)).collect();
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.candidate_id,
                r.rank,
                r.rouge_l,
                r.selected as u8,
                cells.join(",")
            ));
        }
        s
    }

    /// JSON summary without the per-candidate rows.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n_candidates": self.n_candidates,
            "selection": self.selection,
            "method_r": self.method_r,
            "zlib_level": self.zlib_level,
            "rouge": "rouge_l_f1 over lowercased whitespace tokens",
        })
    }

    pub fn write(&self, csv_path: &Path, json_path: &Path) -> Result<(), DataError> {
        let mut f = BufWriter::new(File::create(csv_path)?);
        f.write_all(self.to_csv().as_bytes())?;
        f.flush()?;
        let mut text = serde_json::to_string_pretty(&self.summary_json()).expect("json");
        text.push('\n');
        std::fs::write(json_path, text)?;
        Ok(())
    }
}
