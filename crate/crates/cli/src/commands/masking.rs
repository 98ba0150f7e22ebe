use std::fmt::Write as _;
use std::path::PathBuf;

use attenmia_core::data::read_samples;
use attenmia_core::metrics::pca2;
use attenmia_core::perturb::{masking_sweep, MaskingMode};
use attenmia_core::transformer::TinyTransformer;
use clap::Args;

use super::require_file;
use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct MaskingArgs {
    /// WTSB weight bundle.
    #[arg(long)]
    pub weights: PathBuf,
    /// JSON-lines samples.
    #[arg(long)]
    pub samples: PathBuf,
    /// Sample id to sweep.
    #[arg(long)]
    pub id: String,
    /// `independent` drops token i alone; `cumulative` drops tokens 1..=i.
    #[arg(long, default_value = "cumulative", value_parser = parse_mode)]
    pub mode: MaskingMode,
    /// Number of steps.
    #[arg(long)]
    pub k_max: usize,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_mode(s: &str) -> Result<MaskingMode, String> {
    s.parse().map_err(|e: attenmia_core::perturb::PerturbError| e.to_string())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rows `(step, pc1, pc2, norm)`. Components come from PCA over the origin
/// plus every shift vector; each shift is projected as a direction.
pub fn project_shifts(vectors: &[Vec<f64>]) -> Result<Vec<(usize, f64, f64, f64)>, CliError> {
    if vectors.len() == 1 {
        let n = norm(&vectors[0]);
        return Ok(vec![(1, n, 0.0, n)]);
    }
    let mut points = vec![vec![0.0; vectors.first().map_or(0, Vec::len)]];
    points.extend(vectors.iter().cloned());
    let pca = pca2(&points)?;
    Ok(vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let [a, b] = pca.project_direction(v);
            (i + 1, a, b, norm(v))
        })
        .collect())
}

pub fn run(args: &MaskingArgs, _seed: u64) -> Result<(), CliError> {
    require_file("weights", &args.weights)?;
    require_file("samples", &args.samples)?;
    if args.k_max == 0 {
        return Err(CliError::input("InvalidKMax", "k_max must be at least 1"));
    }
    let model = TinyTransformer::load(&args.weights)?;
    let samples = read_samples(&args.samples, model.config.vocab_size)?;
    let sample = samples
        .iter()
        .find(|s| s.sample_id == args.id)
        .ok_or_else(|| CliError::input("UnknownSample", format!("no sample {:?} in {}", args.id, args.samples.display())))?;
    let vectors = masking_sweep(&sample.sequence, &model, args.mode, args.k_max)?;
    let mut csv = String::from("step,pc1,pc2,vector_norm\n");
    for (step, a, b, n) in project_shifts(&vectors)? {
        let _ = writeln!(csv, "{step},{a},{b},{n}");
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&args.out, csv)?;
    Ok(())
}
