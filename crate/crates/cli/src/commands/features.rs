use std::path::PathBuf;

use attenmia_core::data::AttentionDump;
use attenmia_core::features::{write_feature_cache, write_feature_csv, FeatureMatrix};
use attenmia_core::pipeline::dump_features;
use clap::Args;
use serde_json::json;

use super::{ensure_dir, require_file};
use crate::provenance::{write_json, Provenance};
use crate::{CliError, FeatureArgs};

pub const FEATURES_CSV: &str = "features.csv";
pub const FEATURES_CACHE: &str = "features.feat";
pub const FEATURES_REPORT: &str = "features.json";

#[derive(Debug, Clone, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub features: FeatureArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Opens the dumps named by `args` and extracts the feature matrix.
pub(crate) fn extract(args: &FeatureArgs) -> Result<(FeatureMatrix, Vec<u8>), CliError> {
    require_file("attention", &args.attn)?;
    let original = AttentionDump::open(&args.attn)?;
    let opts = args.options();
    let perturbed = match (&args.perturbed, opts.perturbation) {
        (Some(p), true) => {
            require_file("perturbed attention", p)?;
            Some(AttentionDump::open(p)?)
        }
        _ => None,
    };
    Ok(dump_features(&original, perturbed.as_ref(), &opts)?)
}

pub(crate) fn feature_provenance(cmd: &str, args: &FeatureArgs, seed: u64, config: serde_json::Value) -> Result<Provenance, CliError> {
    Provenance::new(cmd, seed, config)
        .input("attention", &args.attn)?
        .input_opt("perturbed", args.perturbed.as_deref())
}

pub fn run(args: &FeaturesArgs, seed: u64) -> Result<(), CliError> {
    let (matrix, labels) = extract(&args.features)?;
    ensure_dir(&args.out)?;
    write_feature_csv(&matrix, args.out.join(FEATURES_CSV))?;
    write_feature_cache(&matrix, Some(&labels), args.out.join(FEATURES_CACHE))?;
    let prov = feature_provenance("features", &args.features, seed, json!({"options": args.features.options()}))?;
    write_json(
        &args.out.join(FEATURES_REPORT),
        &json!({
            "n_samples": matrix.n_rows(),
            "n_features": matrix.n_cols(),
            "schema_hash": matrix.schema.hash(),
            "provenance": prov,
        }),
    )
}
