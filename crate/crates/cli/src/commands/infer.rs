use std::collections::BTreeMap;
use std::path::PathBuf;

use attenmia_core::data::{read_samples, TokenSequence};
use attenmia_core::perturb::{dump_perturbed, PerturbationPlan};
use attenmia_core::transformer::{dump_attention, DumpTargets, TinyTransformer};
use clap::Args;
use serde_json::json;

use super::{ensure_dir, require_file};
use crate::provenance::{write_json, Provenance};
use crate::CliError;

pub const INFER_ATTENTION: &str = "attn.atnd";
pub const INFER_PERTURBED: &str = "attn_perturbed.atnd";
pub const INFER_LOGPROBS: &str = "logprobs.lgpd";
pub const INFER_REPORT: &str = "infer.json";

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    /// WTSB weight bundle.
    #[arg(long)]
    pub weights: PathBuf,
    /// JSON-lines samples `{id, text | tokens, label, group?}`.
    #[arg(long)]
    pub samples: PathBuf,
    /// JSON perturbation plan; writes the perturbed dump when given.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// JSON-lines token sequences used by prefix specs, keyed by id.
    #[arg(long)]
    pub prefixes: Option<PathBuf>,
    #[arg(long, default_value = "tiny-transformer")]
    pub model_tag: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &InferArgs, seed: u64) -> Result<(), CliError> {
    require_file("weights", &args.weights)?;
    require_file("samples", &args.samples)?;
    let model = TinyTransformer::load(&args.weights)?;
    let vocab = model.config.vocab_size;
    let samples = read_samples(&args.samples, vocab)?;
    ensure_dir(&args.out)?;
    dump_attention(
        &model,
        &samples,
        &args.model_tag,
        &DumpTargets {
            attention: args.out.join(INFER_ATTENTION),
            logprobs: Some(args.out.join(INFER_LOGPROBS)),
        },
    )?;
    if let Some(plan_path) = &args.plan {
        let plan = PerturbationPlan::load(plan_path)?;
        let mut prefixes: BTreeMap<String, TokenSequence> = BTreeMap::new();
        if let Some(p) = &args.prefixes {
            for s in read_samples(p, vocab)? {
                prefixes.insert(s.sample_id, s.sequence);
            }
        }
        dump_perturbed(
            &model,
            &samples,
            &plan,
            vocab,
            &prefixes,
            &args.model_tag,
            &args.out.join(INFER_PERTURBED),
        )?;
    }
    let prov = Provenance::new(
        "infer",
        seed,
        json!({"model_tag": args.model_tag, "config": model.config}),
    )
    .input("weights", &args.weights)?
    .input("samples", &args.samples)?
    .input_opt("plan", args.plan.as_deref())?
    .input_opt("prefixes", args.prefixes.as_deref())?;
    write_json(
        &args.out.join(INFER_REPORT),
        &json!({"n_samples": samples.len(), "provenance": prov}),
    )
}
