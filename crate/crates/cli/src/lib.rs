//! `attenmia` command-line driver. Each subcommand is exposed as a function
//! so the pipeline can also be driven from Rust.

pub mod commands;
mod error;
mod provenance;

pub use error::{Category, CliError};
pub use provenance::{sha256_file, Provenance};

use std::ffi::OsString;
use std::path::PathBuf;

use attenmia_core::classifier::TrainConfig;
use attenmia_core::pipeline::FeatureOptions;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "attenmia", version, about = "Attention-based membership inference audits")]
pub struct Cli {
    /// Global seed for every randomized step.
    #[arg(long, global = true, env = "ATTENMIA_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-sample stages (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded synthetic attention, perturbed attention and log-prob dumps.
    Synth(commands::synth::SynthArgs),
    /// Run a WTSB model over a sample manifest and write dumps.
    Infer(commands::infer::InferArgs),
    /// Extract the feature matrix from attention dumps.
    Features(commands::features::FeaturesArgs),
    /// Train and evaluate the membership classifier with cross-validation.
    Audit(commands::audit::AuditArgs),
    /// Drop tokens one at a time or cumulatively and project the shifts.
    Masking(commands::masking::MaskingArgs),
    /// Rank candidate generations and correlate scores with ROUGE-L.
    Rank(commands::rank::RankArgs),
    /// Output-based baseline scores from log-prob dumps.
    Baselines(commands::baselines::BaselinesArgs),
}

fn parse_layers(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("invalid layer filter {s:?}: use a list like 1,3 or a range like 1..2");
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Parsed `--layers` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerFilter(pub Vec<usize>);

fn parse_layer_filter(s: &str) -> Result<LayerFilter, String> {
    parse_layers(s).map(LayerFilter)
}

/// Attention inputs and feature-family switches shared by `features` and
/// `audit`.
#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    /// ATND attention dump of the original samples.
    #[arg(long)]
    pub attn: PathBuf,
    /// ATND dump of perturbed samples (entries `<id>#<k>`).
    #[arg(long)]
    pub perturbed: Option<PathBuf>,
    #[arg(long)]
    pub no_transitional: bool,
    #[arg(long)]
    pub no_perturbation: bool,
    #[arg(long)]
    pub no_concentration: bool,
    /// Keep features of these 1-based layers only, e.g. `1..2` or `1,4`.
    #[arg(long, value_parser = parse_layer_filter)]
    pub layers: Option<LayerFilter>,
    /// Truncate every sample to its first N tokens.
    #[arg(long)]
    pub max_len: Option<usize>,
}

impl FeatureArgs {
    pub fn options(&self) -> FeatureOptions {
        FeatureOptions {
            transitional: !self.no_transitional,
            perturbation: !self.no_perturbation && self.perturbed.is_some(),
            concentration: !self.no_concentration,
            layers: self.layers.as_ref().map(|l| l.0.clone()),
            max_len: self.max_len,
        }
    }
}

/// Classifier overrides.
#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "64,32")]
    pub hidden: Vec<usize>,
    /// Diagnostic logistic-regression model (no hidden layers).
    #[arg(long)]
    pub logistic: bool,
}

impl TrainArgs {
    pub fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            folds: self.folds,
            max_epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            patience: self.patience,
            hidden: if self.logistic { vec![] } else { self.hidden.clone() },
            seed,
            ..TrainConfig::default()
        }
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed;
    let job = move || match cli.command {
        Command::Synth(a) => commands::synth::run(&a, seed),
        Command::Infer(a) => commands::infer::run(&a, seed),
        Command::Features(a) => commands::features::run(&a, seed),
        Command::Audit(a) => commands::audit::run(&a, seed),
        Command::Masking(a) => commands::masking::run(&a, seed),
        Command::Rank(a) => commands::rank::run(&a, seed),
        Command::Baselines(a) => commands::baselines::run(&a, seed),
    };
    match cli.jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::new(Category::Internal, "ThreadPool", e.to_string()))?;
            pool.install(job)
        }
        None => job(),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_args<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::input("Usage", e.to_string().trim())),
    };
    run(cli)
}
