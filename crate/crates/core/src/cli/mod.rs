//! The `raat` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure (non-finite loss, failed gradient check). A
//! [`RunManifest`] is written on codes 0 and 3.

mod manifest;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use manifest::{FileDigest, RunManifest};

use crate::bench::{
    build_benchmark, generate_synthetic, ingest_retrieval_file, load_benchmark_dir, write_benchmark_dir,
    write_records_jsonl, BenchmarkSources, SplitName, SplitSizes,
};
use crate::error::{RaatError, Result};
use crate::eval::{
    ablation_suite, evaluate, export_prompts, export_representations, Backend, EvalCondition, EvalOptions,
};
use crate::trainer::{
    gradcheck, init_model, read_step_log, train_with, write_step_log, OrderPolicy, SelectionStats, TrainConfig,
    GRADCHECK_TOL,
};

const BENCH_FILES: [&str; 3] = ["train.jsonl", "validation.jsonl", "test.jsonl"];

#[derive(Debug, Parser)]
#[command(name = "raat", version, about = "Retrieval-noise robustness lab")]
pub struct Cli {
    /// Where to write the run manifest (defaults next to the primary output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic retrieval file.
    Synth(SynthArgs),
    /// Build the noise-augmented benchmark from retrieval files.
    BuildBench(BuildBenchArgs),
    /// Train a model on the benchmark's train split.
    Train(TrainArgs),
    /// Evaluate under the four noise conditions.
    Eval(EvalArgs),
    /// Train and evaluate the objective ablations.
    Ablate(AblateArgs),
    /// Finite-difference check of the training gradients.
    Gradcheck(GradcheckArgs),
    /// Summarize a step log.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub queries: usize,
    #[arg(long)]
    pub entities: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildBenchArgs {
    /// Retrieval JSONL files for the train and validation pools.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Retrieval JSONL files for the test pool; without them the test split
    /// is drawn from what the train pool has left.
    #[arg(long, num_args = 1..)]
    pub test_input: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1500)]
    pub train: usize,
    #[arg(long, default_value_t = 300)]
    pub val: usize,
    #[arg(long, default_value_t = 1000)]
    pub test: usize,
}

/// Per-key overrides layered over the config file.
#[derive(Debug, Args, Default)]
pub struct ConfigOverrides {
    #[arg(long)]
    pub w_reg: Option<f64>,
    #[arg(long)]
    pub w_ada: Option<f64>,
    #[arg(long)]
    pub w_cls: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub grad_clip_norm: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub order_policy: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub h: Option<usize>,
}

impl ConfigOverrides {
    pub fn to_map(&self) -> serde_json::Map<String, serde_json::Value> {
        let mut m = serde_json::Map::new();
        let mut put = |k: &str, v: Option<serde_json::Value>| {
            if let Some(v) = v {
                m.insert(k.to_owned(), v);
            }
        };
        put("w_reg", self.w_reg.map(Into::into));
        put("w_ada", self.w_ada.map(Into::into));
        put("w_cls", self.w_cls.map(Into::into));
        put("lr", self.lr.map(Into::into));
        put("epochs", self.epochs.map(Into::into));
        put("grad_clip_norm", self.grad_clip_norm.map(Into::into));
        put("seed", self.seed.map(Into::into));
        put("mode", self.mode.clone().map(Into::into));
        put("order_policy", self.order_policy.clone().map(Into::into));
        put("d", self.d.map(Into::into));
        put("h", self.h.map(Into::into));
        m
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub bench: PathBuf,
    /// Flat JSON object of config keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Step log path (defaults to `<out>.steps.jsonl`).
    #[arg(long)]
    pub steplog: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Builtin,
    File,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendKind::Builtin)]
    pub backend: BackendKind,
    #[arg(long, required_if_eq("backend", "builtin"))]
    pub ckpt: Option<PathBuf>,
    /// Write prompts for an external model and stop.
    #[arg(long, conflicts_with = "predictions_in")]
    pub prompts_out: Option<PathBuf>,
    /// Score predictions produced by an external model.
    #[arg(long)]
    pub predictions_in: Option<PathBuf>,
    /// Directory for report.json, report.tsv and predictions.jsonl.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Also dump last-token representations (builtin backend).
    #[arg(long)]
    pub representations_out: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value = "noise_first")]
    pub order_policy: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub max_len: usize,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub bench: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for ablation.json and ablation.tsv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub steplog: PathBuf,
}

/// Bookkeeping shared by every subcommand for the run manifest.
#[derive(Debug, Default)]
struct Run {
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    manifest: Option<PathBuf>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn bench_files(dir: &Path) -> Vec<PathBuf> {
    BENCH_FILES.iter().map(|f| dir.join(f)).collect()
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("arguments serialize")
}

pub fn load_config(path: Option<&Path>, overrides: &serde_json::Map<String, serde_json::Value>) -> Result<TrainConfig> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| RaatError::io(p, e))?;
            if text.trim().is_empty() {
                Some(serde_json::Value::Object(Default::default()))
            } else {
                Some(
                    serde_json::from_str(&text)
                        .map_err(|e| RaatError::Config(format!("{}: {e}", p.display())))?,
                )
            }
        }
        None => None,
    };
    TrainConfig::layered(file.as_ref(), overrides)
}

fn eval_options(order_policy: &str, seed: u64, max_len: usize) -> Result<EvalOptions> {
    Ok(EvalOptions {
        order_policy: order_policy.parse::<OrderPolicy>().map_err(RaatError::Config)?,
        seed,
        max_len,
    })
}

fn cmd_synth(a: &SynthArgs, run: &mut Run) -> Result<()> {
    run.config = to_value(a);
    run.seed = Some(a.seed);
    if a.entities < 4 {
        return Err(RaatError::Config("--entities must be >= 4".into()));
    }
    let records = generate_synthetic(a.queries, a.entities, a.seed);
    write_records_jsonl(&records, &a.out)?;
    run.outputs.push(a.out.clone());
    run.manifest = Some(sibling(&a.out, ".manifest.json"));
    Ok(())
}

fn cmd_build_bench(a: &BuildBenchArgs, run: &mut Run) -> Result<()> {
    run.config = to_value(a);
    run.seed = Some(a.seed);
    run.inputs = a.input.iter().chain(&a.test_input).cloned().collect();
    let mut train_pool = Vec::new();
    for p in &a.input {
        train_pool.extend(ingest_retrieval_file(p)?);
    }
    let test_pool = if a.test_input.is_empty() {
        None
    } else {
        let mut pool = Vec::new();
        for p in &a.test_input {
            pool.extend(ingest_retrieval_file(p)?);
        }
        Some(pool)
    };
    let sizes = SplitSizes {
        train: a.train,
        validation: a.val,
        test: a.test,
    };
    let set = build_benchmark(BenchmarkSources { train_pool, test_pool }, sizes, a.seed)?;
    write_benchmark_dir(&set, &a.out_dir)?;
    run.outputs = bench_files(&a.out_dir);
    run.manifest = Some(a.out_dir.join("manifest.json"));
    println!(
        "train {} / validation {} / test {} examples written to {}",
        set.train.examples.len(),
        set.validation.examples.len(),
        set.test.examples.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn cmd_train(a: &TrainArgs, run: &mut Run) -> Result<()> {
    let config = load_config(a.config.as_deref(), &a.overrides.to_map())?;
    run.config = to_value(&config);
    run.seed = Some(config.seed);
    run.inputs = bench_files(&a.bench);
    run.inputs.extend(a.config.clone());
    run.manifest = Some(sibling(&a.out, ".manifest.json"));

    let bench = load_benchmark_dir(&a.bench)?;
    let mut model = init_model(&bench.train, &config);
    let outcome = train_with(&mut model, &bench.train.examples, &config, |_| {})?;
    crate::tinylm::checkpoint::save(&model, &a.out)?;
    let steplog = a.steplog.clone().unwrap_or_else(|| sibling(&a.out, ".steps.jsonl"));
    write_step_log(&outcome.log, &steplog)?;
    run.outputs = vec![a.out.clone(), steplog];
    let summary = match outcome.stats {
        Some(stats) => stats.to_json(),
        None => serde_json::json!({ "total_updates": outcome.total_updates }),
    };
    let stats_path = sibling(&a.out, ".stats.json");
    let body = serde_json::to_string_pretty(&summary).expect("stats serialize") + "\n";
    std::fs::write(&stats_path, &body).map_err(|e| RaatError::io(&stats_path, e))?;
    run.outputs.push(stats_path);
    print!("{body}");
    Ok(())
}

fn cmd_eval(a: &EvalArgs, run: &mut Run) -> Result<()> {
    run.config = to_value(a);
    run.seed = Some(a.seed);
    run.inputs = bench_files(&a.bench);
    let opts = eval_options(&a.order_policy, a.seed, a.max_len)?;
    let split_name = SplitName::ALL
        .into_iter()
        .find(|s| s.name() == a.split)
        .ok_or_else(|| RaatError::Config(format!("unknown split {:?}; expected train, validation or test", a.split)))?;
    let set = load_benchmark_dir(&a.bench)?;
    let split = match split_name {
        SplitName::Train => &set.train,
        SplitName::Validation => &set.validation,
        SplitName::Test => &set.test,
    };

    let backend = match a.backend {
        BackendKind::Builtin => {
            let ckpt = a.ckpt.as_ref().ok_or_else(|| RaatError::Config("--ckpt is required".into()))?;
            run.inputs.push(ckpt.clone());
            Backend::from_checkpoint(ckpt)?
        }
        BackendKind::File => {
            if let Some(out) = &a.prompts_out {
                export_prompts(split, &EvalCondition::ALL, &opts, out)?;
                run.outputs.push(out.clone());
                run.manifest = Some(sibling(out, ".manifest.json"));
                return Ok(());
            }
            let preds = a
                .predictions_in
                .as_ref()
                .ok_or_else(|| RaatError::Config("--backend file needs --prompts-out or --predictions-in".into()))?;
            run.inputs.push(preds.clone());
            Backend::from_predictions(preds)?
        }
    };

    let evaluation = evaluate(&backend, split, &EvalCondition::ALL, &opts)?;
    if let (Some(out), Backend::Builtin(model)) = (&a.representations_out, &backend) {
        export_representations(model, split, &opts, out)?;
        run.outputs.push(out.clone());
    }
    if let Some(dir) = &a.out_dir {
        evaluation.write_reports(dir)?;
        run.outputs
            .extend(["report.json", "report.tsv", "predictions.jsonl"].iter().map(|f| dir.join(f)));
        run.manifest = Some(dir.join("manifest.json"));
    }
    print!("{}", evaluation.table.to_tsv());
    Ok(())
}

fn cmd_ablate(a: &AblateArgs, run: &mut Run) -> Result<()> {
    let mut overrides = serde_json::Map::new();
    overrides.insert("seed".into(), a.seed.into());
    let config = load_config(a.config.as_deref(), &overrides)?;
    run.config = to_value(&config);
    run.seed = Some(a.seed);
    run.inputs = bench_files(&a.bench);
    run.inputs.extend(a.config.clone());
    let set = load_benchmark_dir(&a.bench)?;
    let opts = EvalOptions {
        order_policy: config.order_policy,
        seed: a.seed,
        ..EvalOptions::default()
    };
    let report = ablation_suite(&set, &config, &opts)?;
    if let Some(dir) = &a.out_dir {
        report.write(dir)?;
        run.outputs = vec![dir.join("ablation.json"), dir.join("ablation.tsv")];
        run.manifest = Some(dir.join("manifest.json"));
    }
    print!("{}", report.to_tsv());
    Ok(())
}

fn cmd_gradcheck(a: &GradcheckArgs, run: &mut Run) -> Result<()> {
    let config = TrainConfig {
        seed: a.seed,
        ..TrainConfig::default()
    };
    run.config = to_value(&config);
    run.seed = Some(a.seed);
    let report = gradcheck(a.seed, config.raat_weights())?;
    println!(
        "seed {} checked {} parameters, max relative error {:e}",
        report.seed, report.params_checked, report.max_rel_err
    );
    if report.max_rel_err >= GRADCHECK_TOL {
        return Err(RaatError::GradCheck {
            max_rel_err: report.max_rel_err,
            tolerance: GRADCHECK_TOL,
        });
    }
    Ok(())
}

fn cmd_analyze(a: &AnalyzeArgs, run: &mut Run) -> Result<()> {
    run.config = to_value(a);
    run.inputs = vec![a.steplog.clone()];
    let log = read_step_log(&a.steplog)?;
    let stats = SelectionStats::from_log(&log);
    let mut json = stats.to_json();
    json["steps"] = log.len().into();
    println!("{}", serde_json::to_string_pretty(&json).expect("stats serialize"));
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("RAAT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| RaatError::Config(format!("RAAT_THREADS must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        // A pool that already exists (repeated in-process dispatch) is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Synth(_) => "synth",
        Command::BuildBench(_) => "build-bench",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::Ablate(_) => "ablate",
        Command::Gradcheck(_) => "gradcheck",
        Command::Analyze(_) => "analyze",
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let start = Instant::now();
    let mut run = Run::default();
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Synth(a) => cmd_synth(a, &mut run),
        Command::BuildBench(a) => cmd_build_bench(a, &mut run),
        Command::Train(a) => cmd_train(a, &mut run),
        Command::Eval(a) => cmd_eval(a, &mut run),
        Command::Ablate(a) => cmd_ablate(a, &mut run),
        Command::Gradcheck(a) => cmd_gradcheck(a, &mut run),
        Command::Analyze(a) => cmd_analyze(a, &mut run),
    });
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    if code == 0 || code == 3 {
        let name = subcommand_name(&cli.command);
        let path = cli
            .manifest
            .clone()
            .or(run.manifest.clone())
            .unwrap_or_else(|| PathBuf::from(format!("raat-{name}.manifest.json")));
        let written = RunManifest::collect(
            name,
            run.config,
            run.seed,
            &run.inputs,
            &run.outputs,
            code,
            start.elapsed().as_secs_f64(),
        )
        .and_then(|m| m.write_atomic(&path));
        if let Err(e) = written {
            eprintln!("error: writing manifest: {e}");
            return if code == 0 { e.exit_code() } else { code };
        }
    }
    code
}

/// Parses `argv` and runs it. Usage errors exit 1; `--help` and `--version` exit 0.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                1
            } else {
                0
            }
        }
    }
}
