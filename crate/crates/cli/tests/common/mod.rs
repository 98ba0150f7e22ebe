//! Fixtures shared by the CLI test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use attenmia_cli::{run_args, CliError};
use attenmia_core::transformer::{save_weights, ModelConfig, WeightBundle};
use serde_json::json;

pub fn run(args: &[&str]) -> Result<(), CliError> {
    run_args(std::iter::once("attenmia").chain(args.iter().copied()))
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Every file under `root` (or `root` itself) keyed by relative path.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    if root.is_file() {
        out.insert(String::new(), std::fs::read(root).unwrap());
        return out;
    }
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Runs `args` with `--out` set to `<dir>/a` then `<dir>/b` and reports
/// whether both outputs are byte-identical.
pub fn twice_identical(dir: &Path, name: &str, args: &[&str]) -> Result<bool, String> {
    let mut snaps = Vec::new();
    for run_tag in ["a", "b"] {
        let out = dir.join(format!("{name}-{run_tag}"));
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", s(&out)]);
        run(&full).map_err(|e| format!("{name}: {}", e.line()))?;
        snaps.push(snapshot(&out));
    }
    Ok(!snaps[0].is_empty() && snaps[0] == snaps[1])
}

pub struct Synth {
    pub dir: PathBuf,
}

impl Synth {
    pub fn attn(&self) -> PathBuf {
        self.dir.join("attn.atnd")
    }
    pub fn perturbed(&self) -> PathBuf {
        self.dir.join("attn_perturbed.atnd")
    }
    pub fn logprobs(&self) -> PathBuf {
        self.dir.join("logprobs.lgpd")
    }
    pub fn plan(&self) -> PathBuf {
        self.dir.join("plan.json")
    }
}

pub fn synth(dir: &Path, members: usize, nonmembers: usize, shape: (usize, usize, usize), seed: u64) -> Synth {
    let out = dir.join(format!("synth-{members}-{nonmembers}-{seed}"));
    let (l, h, t) = (shape.0.to_string(), shape.1.to_string(), shape.2.to_string());
    let (m, n, seed) = (members.to_string(), nonmembers.to_string(), seed.to_string());
    run(&[
        "--seed", &seed, "synth", "--members", &m, "--nonmembers", &n, "--layers", &l, "--heads", &h, "--seq-len", &t,
        "--out", s(&out),
    ])
    .unwrap();
    Synth { dir: out }
}

/// Random 2-layer model plus a six-sample token manifest and a prefix file.
pub struct Toy {
    pub weights: PathBuf,
    pub samples: PathBuf,
    pub prefixes: PathBuf,
    pub plan: PathBuf,
}

pub fn toy(dir: &Path) -> Toy {
    let cfg = ModelConfig::new(2, 2, 8, 16, 64, 32).unwrap();
    let weights = dir.join("toy.wtsb");
    save_weights(&cfg, &WeightBundle::random(&cfg, 5, 0.8, true), &weights).unwrap();
    let samples = dir.join("samples.jsonl");
    let mut f = std::fs::File::create(&samples).unwrap();
    for i in 0..6u32 {
        let tokens: Vec<u32> = (0..10).map(|k| (i * 7 + k * 3) % 64).collect();
        writeln!(f, "{}", json!({"id": format!("t{i}"), "tokens": tokens, "label": i % 2})).unwrap();
    }
    let prefixes = dir.join("prefixes.jsonl");
    std::fs::write(&prefixes, format!("{}\n", json!({"id": "pre", "tokens": [1, 2, 3], "label": 0}))).unwrap();
    let plan = dir.join("plan.json");
    attenmia_core::perturb::PerturbationPlan::default_plan(13, Some("pre".into())).save(&plan).unwrap();
    Toy { weights, samples, prefixes, plan }
}

/// Candidate corpus over a synthetic dump: members continue their reference
/// verbatim, non-members produce unrelated text.
pub fn corpus(synth: &Synth, ids_labels: &[(String, u8)]) -> PathBuf {
    let path = synth.dir.join("corpus.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    for (id, y) in ids_labels {
        let reference = format!("records show that sample {id} was written in the archive");
        let generation = if *y == 1 { reference.clone() } else { format!("a different sentence about {id} entirely") };
        let rec = json!({
            "id": id, "prefix": "p", "generation": generation, "reference": reference,
            "dumps": {"xl": "logprobs.lgpd", "attn": "attn.atnd", "attn_perturbed": "attn_perturbed.atnd"},
        });
        writeln!(f, "{rec}").unwrap();
    }
    path
}

pub fn ids_labels(synth: &Synth) -> Vec<(String, u8)> {
    let dump = attenmia_core::data::AttentionDump::open(synth.attn()).unwrap();
    dump.entries().iter().map(|e| (e.id.clone(), e.label)).collect()
}

pub fn report(dir: &Path, file: &str) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join(file)).unwrap()).unwrap()
}
