use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use rulerank::config::Config;
use rulerank::harness::{
    build_mask, inject_adversarial, perturb::perturb, run_benchmark, run_strategy, synthesize, verify, BenchItem,
    BenchOptions, CorruptionSpec, InjectionFamily, MaskPolicy, PerturbKind, SynthConfig, Template,
};
use rulerank::proxy::{evaluate, ApplicabilityMask, Evaluation};
use rulerank::scenario::{load_document, save_document, ScenarioDocument};
use rulerank::select::{SelectionResult, Strategy};
use rulerank::Error;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: Error },
    #[error("{0}: document has no candidates")]
    NoCandidates(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "rulerank", version, about = "Rule-aware reranking of trajectory candidates")]
struct Cli {
    /// Config file (JSON). Falls back to $RULERANK_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded synthetic scenarios with candidates and ground truth.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 6)]
        k: usize,
        /// Restrict to these templates (comma separated).
        #[arg(long, value_delimiter = ',', value_parser = parse_template)]
        template: Vec<Template>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate every rule on every candidate and write the violation report.
    Evaluate {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one selection strategy on each scenario.
    Select {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_parser = parse_strategy)]
        strategy: Strategy,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare strategies on the same candidate sets.
    Compare {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_delimiter = ',', value_parser = parse_strategy, default_value = "lex,scalar,wsum,conf")]
        strategies: Vec<Strategy>,
        /// Add paired tests and bootstrap intervals.
        #[arg(long)]
        stats: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inject a high-confidence rule-violating mode into each scenario.
    Corrupt {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long, value_parser = parse_family)]
        family: InjectionFamily,
        #[arg(long, default_value_t = 0.01)]
        margin: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write seeded perturbed copies of each scenario.
    Perturb {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: PerturbKind,
        #[arg(long)]
        level: usize,
        #[arg(long, default_value_t = rulerank::harness::perturb::DEFAULT_REPETITIONS)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the property suite. Exits non-zero unless every property passes.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = rulerank::harness::verify::DEFAULT_INSTANCES)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Input {
    /// Directory of scenario documents (*.json) carrying candidates.
    #[arg(long)]
    scenarios: PathBuf,
    #[arg(long, default_value = "activation", value_parser = parse_mask)]
    mask: MaskPolicy,
    /// JSON object keyed by scenario id: {"labels": [bool], "scores": [f64]}.
    #[arg(long)]
    labels: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    Strategy::parse(s).ok_or_else(|| format!("unknown strategy {s:?}; expected lex, scalar, wsum or conf"))
}

fn parse_mask(s: &str) -> std::result::Result<MaskPolicy, String> {
    MaskPolicy::parse(s).ok_or_else(|| format!("unknown mask policy {s:?}"))
}

fn parse_family(s: &str) -> std::result::Result<InjectionFamily, String> {
    InjectionFamily::parse(s).ok_or_else(|| format!("unknown injection family {s:?}"))
}

fn parse_kind(s: &str) -> std::result::Result<PerturbKind, String> {
    PerturbKind::parse(s).ok_or_else(|| format!("unknown perturbation kind {s:?}"))
}

fn parse_template(s: &str) -> std::result::Result<Template, String> {
    Template::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| format!("unknown template {s:?}"))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelEntry {
    #[serde(default)]
    labels: Option<Vec<bool>>,
    #[serde(default)]
    scores: Option<Vec<f64>>,
}

/// Documents in `dir` sorted by file name, with their file stems.
fn read_dir(dir: &Path) -> Result<Vec<(String, ScenarioDocument)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let doc = load_document(&fs::read(&p)?)
                .map_err(|source| CliError::File { path: p.clone(), source })?;
            Ok((stem, doc))
        })
        .collect()
}

fn load_items(input: &Input) -> Result<Vec<BenchItem>> {
    let mut labels: BTreeMap<String, LabelEntry> = match &input.labels {
        Some(p) => serde_json::from_slice(&fs::read(p)?)?,
        None => BTreeMap::new(),
    };
    read_dir(&input.scenarios)?
        .into_iter()
        .map(|(stem, doc)| {
            let candidates = doc
                .candidates
                .ok_or(CliError::NoCandidates(stem))?;
            let mut item = BenchItem::new(doc.scenario, candidates);
            item.ground_truth = doc.ground_truth;
            if let Some(entry) = labels.remove(item.scenario.id()) {
                item.labels = entry.labels;
                item.scores = entry.scores;
            }
            Ok(item)
        })
        .collect()
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluateEntry {
    id: String,
    mask: ApplicabilityMask,
    evaluation: Evaluation,
}

#[derive(Serialize)]
struct EvaluateReport {
    mask_policy: MaskPolicy,
    rules: Vec<String>,
    scenarios: Vec<EvaluateEntry>,
}

#[derive(Serialize)]
struct SelectEntry {
    id: String,
    result: SelectionResult,
}

#[derive(Serialize)]
struct SelectReport {
    strategy: Strategy,
    mask_policy: MaskPolicy,
    scenarios: Vec<SelectEntry>,
}

#[derive(Serialize)]
struct WriteSummary {
    written: Vec<String>,
    skipped: Vec<Skipped>,
}

#[derive(Serialize)]
struct Skipped {
    id: String,
    error: String,
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Synth { seed, count, k, template, out } => {
            let mut cfg = SynthConfig { seed, count, k, ..SynthConfig::default() };
            if !template.is_empty() {
                cfg.templates = template.into_iter().map(|t| (t, 1.0)).collect();
            }
            fs::create_dir_all(&out)?;
            let mut written = Vec::new();
            for s in synthesize(&cfg)? {
                let name = format!("{}.json", s.scenario.id());
                fs::write(out.join(&name), save_document(&s.document()))?;
                written.push(name);
            }
            emit(None, &WriteSummary { written, skipped: Vec::new() })?;
        }
        Command::Evaluate { input, out } => {
            let cfg = Config::resolve(cli.config.as_deref())?;
            let rb = cfg.rulebook()?;
            let opts = cfg.eval_options();
            let mut scenarios = Vec::new();
            for item in load_items(&input)? {
                let mask = build_mask(&item, input.mask, &rb, &opts)?;
                let evaluation = evaluate(&item.candidates, &item.scenario, &mask, &rb, &opts)?;
                scenarios.push(EvaluateEntry { id: item.scenario.id().to_string(), mask, evaluation });
            }
            let rules = rb.rules().iter().map(|r| r.paper_id.clone()).collect();
            emit(out.as_deref(), &EvaluateReport { mask_policy: input.mask, rules, scenarios })?;
        }
        Command::Select { input, strategy, out } => {
            let cfg = Config::resolve(cli.config.as_deref())?;
            let rb = cfg.rulebook()?;
            let opts = cfg.eval_options();
            let sel = cfg.selector();
            let mut scenarios = Vec::new();
            for item in load_items(&input)? {
                let mask = build_mask(&item, input.mask, &rb, &opts)?;
                let eval = evaluate(&item.candidates, &item.scenario, &mask, &rb, &opts)?;
                let result = run_strategy(strategy, &eval, &mask, item.candidates.confidences(), &sel)?;
                scenarios.push(SelectEntry { id: item.scenario.id().to_string(), result });
            }
            emit(out.as_deref(), &SelectReport { strategy, mask_policy: input.mask, scenarios })?;
        }
        Command::Compare { input, strategies, stats, seed, out } => {
            let cfg = Config::resolve(cli.config.as_deref())?;
            let rb = cfg.rulebook()?;
            let items = load_items(&input)?;
            let opts = BenchOptions {
                strategies,
                mask: input.mask,
                selector: cfg.selector(),
                eval: cfg.eval_options(),
                miss_threshold: cfg.miss_threshold,
                stats,
                bootstrap_resamples: cfg.bootstrap_resamples,
                seed,
            };
            emit(out.as_deref(), &run_benchmark(&items, &rb, &opts)?)?;
        }
        Command::Corrupt { scenarios, family, margin, out } => {
            let spec = CorruptionSpec { family, confidence_margin: margin };
            spec.validate()?;
            fs::create_dir_all(&out)?;
            let mut summary = WriteSummary { written: Vec::new(), skipped: Vec::new() };
            for (stem, doc) in read_dir(&scenarios)? {
                let Some(candidates) = doc.candidates.as_ref() else {
                    summary.skipped.push(Skipped { id: stem, error: "document has no candidates".into() });
                    continue;
                };
                match inject_adversarial(&doc.scenario, candidates, &spec) {
                    Ok(c) => {
                        let name = format!("{stem}.json");
                        let corrupted = ScenarioDocument { candidates: Some(c), ..doc };
                        fs::write(out.join(&name), save_document(&corrupted))?;
                        summary.written.push(name);
                    }
                    // impossible families are reported per scenario, not fatal for the batch
                    Err(e @ Error::Injection(_)) => summary.skipped.push(Skipped { id: stem, error: e.to_string() }),
                    Err(e) => return Err(e.into()),
                }
            }
            emit(None, &summary)?;
        }
        Command::Perturb { scenarios, kind, level, reps, seed, out } => {
            fs::create_dir_all(&out)?;
            let mut written = Vec::new();
            for (stem, doc) in read_dir(&scenarios)? {
                for (r, scenario) in perturb(&doc.scenario, kind, level, reps, seed)?.into_iter().enumerate() {
                    let name = format!("{stem}~{}{level}-{r:02}.json", kind.name());
                    let copy = ScenarioDocument { scenario, candidates: doc.candidates.clone(), ground_truth: doc.ground_truth.clone() };
                    fs::write(out.join(&name), save_document(&copy))?;
                    written.push(name);
                }
            }
            emit(None, &WriteSummary { written, skipped: Vec::new() })?;
        }
        Command::Verify { seed, n, out } => {
            let report = verify(seed, n)?;
            emit(out.as_deref(), &report)?;
            if !report.all_passed {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
