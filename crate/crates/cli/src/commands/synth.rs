use std::path::PathBuf;

use attenmia_core::synth::{generate, SynthConfig};
use clap::Args;
use serde_json::json;

use super::ensure_dir;
use crate::provenance::{write_json, Provenance};
use crate::CliError;

pub const SYNTH_REPORT_FILE: &str = "synth.json";

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    pub members: usize,
    #[arg(long, default_value_t = 100)]
    pub nonmembers: usize,
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    #[arg(long, default_value_t = 16)]
    pub seq_len: usize,
    #[arg(long, default_value_t = 1000)]
    pub vocab_size: usize,
    /// Length of the seeded prefix used by the prefix perturbation.
    #[arg(long, default_value_t = 4)]
    pub prefix_len: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SynthArgs, seed: u64) -> Result<(), CliError> {
    let mut cfg = SynthConfig::new(args.members, args.nonmembers, args.layers, args.heads, args.seq_len, seed);
    cfg.vocab_size = args.vocab_size;
    cfg.prefix_len = args.prefix_len;
    let data = generate(&cfg)?;
    ensure_dir(&args.out)?;
    data.write(&args.out)?;
    let prov = Provenance::new("synth", seed, serde_json::to_value(&cfg).expect("config serializes"));
    let report = json!({
        "members": args.members,
        "nonmembers": args.nonmembers,
        "layers": args.layers,
        "heads": args.heads,
        "seq_len": args.seq_len,
        "provenance": prov,
    });
    write_json(&args.out.join(SYNTH_REPORT_FILE), &report)
}
