use std::path::PathBuf;

use attenmia_core::classifier::load_model;
use attenmia_core::extraction::{evaluate_ranking, read_corpus, score_corpus};
use attenmia_core::perturb::PerturbationPlan;
use clap::Args;
use serde_json::json;

use super::{ensure_dir, require_file};
use crate::provenance::{write_json, Provenance};
use crate::CliError;

pub const RANK_CSV: &str = "ranking.csv";
pub const RANK_JSON: &str = "ranking.json";
pub const RANK_SCORES: &str = "scores.csv";

#[derive(Debug, Clone, Args)]
pub struct RankArgs {
    /// JSON-lines candidate corpus; dump paths resolve relative to its directory.
    #[arg(long)]
    pub corpus: PathBuf,
    /// MLPM classifier from `audit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Perturbation plan the perturbed dumps were built with.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Highest-ROUGE-L candidates kept for the correlation.
    #[arg(long, default_value_t = 100)]
    pub top: usize,
    /// Lowest-ROUGE-L candidates kept for the correlation.
    #[arg(long, default_value_t = 100)]
    pub bottom: usize,
    /// Correlate over every candidate instead of the top/bottom selection.
    #[arg(long)]
    pub full: bool,
    /// Truncate attention to the first N tokens.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &RankArgs, seed: u64) -> Result<(), CliError> {
    require_file("corpus", &args.corpus)?;
    require_file("model", &args.model)?;
    let records = read_corpus(&args.corpus)?;
    let model = load_model(&args.model)?;
    let plan = args.plan.as_deref().map(PerturbationPlan::load).transpose()?;
    let base = args.corpus.parent().map(PathBuf::from).unwrap_or_default();
    let table = score_corpus(&records, &model, plan.as_ref(), &base, args.max_len)?;
    let (top, bottom) = if args.full { (table.rows.len(), 0) } else { (args.top, args.bottom) };
    let report = evaluate_ranking(&table, top, bottom)?;
    ensure_dir(&args.out)?;
    std::fs::write(args.out.join(RANK_SCORES), table.to_csv())?;
    std::fs::write(args.out.join(RANK_CSV), report.to_csv())?;
    let prov = Provenance::new(
        "rank",
        seed,
        json!({"top": top, "bottom": bottom, "full": args.full, "max_len": args.max_len}),
    )
    .input("corpus", &args.corpus)?
    .input("model", &args.model)?
    .input_opt("plan", args.plan.as_deref())?;
    let mut summary = report.summary_json();
    summary["provenance"] = serde_json::to_value(prov).expect("provenance serializes");
    write_json(&args.out.join(RANK_JSON), &summary)
}
