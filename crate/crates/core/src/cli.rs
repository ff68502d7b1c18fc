//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfigFile, SandboxBackend, SandboxConfig};
use crate::cop::{
    baseline_solve, bin_lower_bound, generate_instances, objective, optimality_gap, Baseline,
    CopKind, Dataset, GeneratorParams, Instance, Sense, SizeDistribution,
};
use crate::evolution::{
    evaluate_instances, BatchReport, Engine, EngineState, EvalStatus, HeuristicBundle, RunResult,
    CHECKPOINT_FILE,
};
use crate::llm::{Backend, LlmClient, Transcript};
use crate::reduction::write_archive;
use crate::scripted::scripted_client;

#[derive(Debug, Parser)]
#[command(name = "redsearch", version, about = "Evolve heuristics for combinatorial problems through generated problem reductions")]
pub struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded dataset file.
    GenData(GenDataArgs),
    /// Run the full search from a configuration file.
    Run(RunArgs),
    /// Evaluate a saved heuristic bundle on a dataset.
    Eval(EvalArgs),
    /// Run the classical baselines on a dataset.
    Baselines(BaselineArgs),
    /// Re-run a recorded search from its transcript.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// tsp, cvrp, bpp, obpp, kp or mkp.
    #[arg(long)]
    kind: CopKind,
    /// Problem size (nodes, customers or items).
    #[arg(long)]
    n: usize,
    /// Vehicle, bin or knapsack capacity.
    #[arg(long)]
    capacity: Option<f64>,
    /// Largest CVRP demand.
    #[arg(long, default_value_t = 9)]
    max_demand: u32,
    /// Number of MKP knapsacks.
    #[arg(long, default_value_t = 5)]
    m: usize,
    /// Item sizes for bin packing: `uniform:MIN:MAX` or `weibull:SHAPE:SCALE`.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output folder; overrides the configuration file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Replace an existing output folder.
    #[arg(long)]
    force: bool,
    /// Independent runs with consecutive seeds.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    #[arg(long)]
    backend: Option<Backend>,
    /// Transcript to replay.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Continue from the checkpoint in the output folder.
    #[arg(long)]
    resume: bool,
}

#[derive(Debug, Args)]
struct SandboxArgs {
    /// fixture or process.
    #[arg(long, default_value = "fixture")]
    sandbox: SandboxBackend,
    /// Runner command for the process sandbox, e.g. `--runner python3 --runner runner.py`.
    #[arg(long)]
    runner: Vec<String>,
    /// Budget for the whole dataset, in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
}

impl SandboxArgs {
    fn config(&self) -> Result<SandboxConfig> {
        let mut cfg = SandboxConfig { backend: self.sandbox, ..SandboxConfig::default() };
        if let Some((program, args)) = self.runner.split_first() {
            cfg.program = program.clone();
            cfg.args = args.to_vec();
        } else if self.sandbox == SandboxBackend::Process {
            bail!("the process sandbox needs --runner");
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Heuristic bundle JSON as written by `run`.
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Known optima, one `name value` pair per line.
    #[arg(long)]
    optima: Option<PathBuf>,
    /// Machine-readable report.
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    sandbox: SandboxArgs,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    optima: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    transcript: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the recorded run, when it was given on the command line.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    force: bool,
    /// A result file the replay must reproduce exactly.
    #[arg(long)]
    expect: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> Result<ExitCode>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::Baselines(a) => baselines(a),
        Command::Replay(a) => replay(a),
    }
}

/// Entry point for the binary.
pub fn main() -> ExitCode {
    match run_cli(std::env::args_os()) {
        Ok(code) => code,
        Err(e) => {
            if let Some(clap_err) = e.downcast_ref::<clap::Error>() {
                let _ = clap_err.print();
                return ExitCode::from(if clap_err.use_stderr() { 2 } else { 0 });
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn parse_sizes(spec: &str) -> Result<SizeDistribution> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["uniform", min, max] => Ok(SizeDistribution::UniformInt { min: min.parse()?, max: max.parse()? }),
        ["weibull", shape, scale] => Ok(SizeDistribution::Weibull { shape: shape.parse()?, scale: scale.parse()? }),
        _ => bail!("size distribution must be uniform:MIN:MAX or weibull:SHAPE:SCALE, got `{spec}`"),
    }
}

fn generator_params(a: &GenDataArgs) -> Result<GeneratorParams> {
    let capacity = || a.capacity.ok_or_else(|| anyhow!("--capacity is required for {}", a.kind));
    let sizes = a.sizes.as_deref().map(parse_sizes).transpose()?.unwrap_or_default();
    Ok(match a.kind {
        CopKind::Tsp => GeneratorParams::Tsp { n: a.n },
        CopKind::Cvrp => GeneratorParams::Cvrp { n: a.n, capacity: capacity()?, max_demand: a.max_demand },
        CopKind::Bpp => GeneratorParams::Bpp { n: a.n, capacity: capacity()?, sizes },
        CopKind::Obpp => GeneratorParams::Obpp { n: a.n, capacity: capacity()?, sizes },
        CopKind::Kp => GeneratorParams::Kp { n: a.n, capacity: capacity()? },
        CopKind::Mkp => GeneratorParams::Mkp { n: a.n, m: a.m },
    })
}

fn gen_data(a: GenDataArgs) -> Result<ExitCode> {
    let params = generator_params(&a)?;
    if a.out.exists() && !a.force {
        bail!("{} exists; pass --force to overwrite it", a.out.display());
    }
    let dataset = generate_instances(&params, a.seed, a.count)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let digest = dataset.write(&a.out)?;
    println!("wrote {} {} instances to {}", dataset.len(), dataset.kind, a.out.display());
    println!("digest {digest}");
    Ok(ExitCode::SUCCESS)
}

/// Makes `dir` ready for fresh output.
fn prepare_out(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        if !force {
            bail!("{} is not empty; pass --force to replace it", dir.display());
        }
        fs::remove_dir_all(dir)?;
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

struct RunOutcome {
    result: RunResult,
    out: PathBuf,
}

fn single_run(cfg: &RunConfigFile, out: &Path, force: bool, resume: bool) -> Result<RunOutcome> {
    let dataset = Dataset::read(&cfg.dataset)
        .with_context(|| format!("reading dataset {}", cfg.dataset.display()))?;
    let evo = cfg.evolution_for(dataset.kind)?;
    let checkpoint = out.join(CHECKPOINT_FILE);
    let state = if resume {
        Some(EngineState::load(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?)
    } else {
        None
    };
    let skip = state.as_ref().map_or(0, |s| s.llm_calls);
    // the client is built first so a missing key or transcript fails
    // before anything is written
    let params = cfg.llm.params();
    let llm = match cfg.llm.backend {
        Backend::Live => LlmClient::live(&cfg.llm)?,
        Backend::Mock => scripted_client(dataset.kind, params),
        Backend::Replay => {
            let path = cfg
                .transcript
                .as_ref()
                .ok_or_else(|| anyhow!("the replay backend needs a transcript"))?;
            let transcript = Transcript::load(path).with_context(|| format!("loading {}", path.display()))?;
            LlmClient::replay_from(params, transcript, cfg.llm.replay_mode, skip)?
        }
    };
    if state.is_none() {
        prepare_out(out, force)?;
    }
    let llm = if cfg.llm.backend == Backend::Replay {
        llm
    } else {
        // a resumed run records into a new file so the original stays intact
        let record_to = match &state {
            Some(s) => out.join(format!("transcript.resume-{}.jsonl", s.generation)),
            None => out.join("transcript.jsonl"),
        };
        llm.recording(Some(&record_to))?
    };
    let sandbox = cfg.sandbox.build();
    let engine = Engine::new(evo, &llm, sandbox.as_ref(), &dataset)?.with_checkpoints(out);
    let state = match state {
        Some(s) => s,
        None => engine.initialize()?,
    };
    let state = engine.complete(state)?;
    let result = engine.result(&state);
    fs::write(out.join("result.json"), result.to_json()?)?;
    fs::write(out.join("best_heuristic.json"), serde_json::to_string_pretty(&result.best)?)?;
    write_archive(&out.join("reductions"), &state.lrs)?;
    Ok(RunOutcome { result, out: out.to_path_buf() })
}

fn report_run(o: &RunOutcome) -> Result<()> {
    let best = &o.result.best;
    println!(
        "best fitness {} (heuristic {}, reduction {}, generation {})",
        best.fitness, best.heuristic_id, best.lr_id, best.generation
    );
    println!("  {}", best.description);
    println!("result      {}", o.out.join("result.json").display());
    println!("heuristic   {}", o.out.join("best_heuristic.json").display());
    println!("reductions  {}", o.out.join("reductions").display());
    println!("checkpoint  {}", o.out.join(CHECKPOINT_FILE).display());
    println!("digest      {}", o.result.digest()?);
    Ok(())
}

fn run(a: RunArgs) -> Result<ExitCode> {
    let mut cfg = RunConfigFile::load(&a.config)?;
    if let Some(b) = a.backend {
        cfg.llm.backend = b;
    }
    if let Some(t) = a.transcript {
        cfg.transcript = Some(t);
    }
    if let Some(w) = a.workers {
        cfg.evolution.workers = Some(w);
    }
    let out = a
        .out
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| anyhow!("no output folder: pass --out or set `out` in the configuration"))?;
    let base_seed = a.seed.or(cfg.evolution.seed).unwrap_or(0);
    if a.repeat == 0 {
        bail!("--repeat must be at least 1");
    }
    if a.repeat == 1 {
        cfg.evolution.seed = Some(base_seed);
        let o = single_run(&cfg, &out, a.force, a.resume)?;
        report_run(&o)?;
        return Ok(ExitCode::SUCCESS);
    }
    if cfg.llm.backend == Backend::Replay {
        bail!("a transcript holds a single run; --repeat needs the live or mock backend");
    }
    if a.resume {
        bail!("--resume applies to a single run");
    }
    prepare_out(&out, a.force)?;
    let mut runs = Vec::new();
    for i in 0..a.repeat {
        let seed = base_seed + i as u64;
        cfg.evolution.seed = Some(seed);
        let o = single_run(&cfg, &out.join(format!("run-{}", i + 1)), false, false)?;
        println!("run {} (seed {seed})", i + 1);
        report_run(&o)?;
        runs.push((seed, o));
    }
    let fitness: Vec<f64> = runs.iter().map(|(_, o)| o.result.best.fitness).collect();
    let mean = fitness.iter().sum::<f64>() / fitness.len() as f64;
    let best = fitness.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("{:>5} {:>8} {:>16}", "run", "seed", "best fitness");
    for (i, (seed, o)) in runs.iter().enumerate() {
        println!("{:>5} {:>8} {:>16.6}", i + 1, seed, o.result.best.fitness);
    }
    println!("mean {mean:.6}  best {best:.6}");
    let summary = json!({
        "runs": runs.iter().map(|(seed, o)| json!({
            "seed": seed,
            "best_fitness": o.result.best.fitness,
            "dir": o.out,
        })).collect::<Vec<_>>(),
        "mean_best_fitness": mean,
        "best_fitness": best,
    });
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(ExitCode::SUCCESS)
}

fn replay(a: ReplayArgs) -> Result<ExitCode> {
    let mut cfg = RunConfigFile::load(&a.config)?;
    cfg.llm.backend = Backend::Replay;
    cfg.transcript = Some(a.transcript);
    if let Some(s) = a.seed {
        cfg.evolution.seed = Some(s);
    }
    let out = a
        .out
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| anyhow!("no output folder: pass --out or set `out` in the configuration"))?;
    let o = single_run(&cfg, &out, a.force, false)?;
    report_run(&o)?;
    if let Some(expected) = a.expect {
        let want = fs::read_to_string(&expected).with_context(|| format!("reading {}", expected.display()))?;
        if want != o.result.to_json()? {
            eprintln!("replayed result differs from {}", expected.display());
            return Ok(ExitCode::FAILURE);
        }
        println!("matches {}", expected.display());
    }
    Ok(ExitCode::SUCCESS)
}

/// Known optima: one `name value` pair per line; `#` starts a comment.
pub fn parse_optima(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            bail!("line {}: expected `name value`", i + 1);
        };
        let value: f64 = value.parse().with_context(|| format!("line {}", i + 1))?;
        map.insert(name.to_string(), value);
    }
    Ok(map)
}

fn load_optima(path: Option<&Path>) -> Result<BTreeMap<String, f64>> {
    match path {
        Some(p) => parse_optima(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
        None => Ok(BTreeMap::new()),
    }
}

/// Reference value for gaps: a known optimum by instance name, or the bin
/// lower bound for packing problems.
fn reference(dataset: &Dataset, k: usize, optima: &BTreeMap<String, f64>) -> Option<f64> {
    if let Some(v) = dataset.name(k).and_then(|n| optima.get(n)) {
        return Some(*v);
    }
    match &dataset.instances[k] {
        Instance::Bpp(b) => Some(bin_lower_bound(&b.item_sizes, b.bin_capacity)),
        Instance::Obpp(o) => Some(bin_lower_bound(&o.item_stream, o.bin_capacity)),
        _ => None,
    }
}

/// Objective magnitude in the problem's natural units (tour length, bins, value).
fn magnitude(kind: CopKind, q: f64) -> f64 {
    match kind.sense() {
        Sense::Minimize => -q,
        Sense::Maximize => q,
    }
}

#[derive(Debug, Serialize)]
struct EvalLine {
    index: usize,
    name: Option<String>,
    status: EvalStatus,
    objective: Option<f64>,
    gap_percent: Option<f64>,
    detail: Option<String>,
}

fn eval(a: EvalArgs) -> Result<ExitCode> {
    let bundle = HeuristicBundle::load(&a.bundle).with_context(|| format!("reading bundle {}", a.bundle.display()))?;
    let dataset = Dataset::read(&a.dataset).with_context(|| format!("reading dataset {}", a.dataset.display()))?;
    if bundle.cop_kind != dataset.kind {
        bail!("bundle is for {} but the dataset holds {}", bundle.cop_kind, dataset.kind);
    }
    let optima = load_optima(a.optima.as_deref())?;
    let sandbox = a.sandbox.config()?.build();
    let report = evaluate_instances(
        "eval",
        &bundle.heuristic_code,
        &bundle.reduction_code,
        &dataset,
        sandbox.as_ref(),
        a.sandbox.timeout,
    )?;
    let instances = match report {
        BatchReport::Completed { instances } => instances,
        BatchReport::Failed { status, detail } => {
            println!("batch failed ({status:?}): {detail}");
            return Ok(ExitCode::FAILURE);
        }
    };
    let kind = dataset.kind;
    let lines: Vec<EvalLine> = instances
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            let gap = r.objective.and_then(|q| {
                let reference = reference(&dataset, k, &optima)?;
                optimality_gap(magnitude(kind, q), reference, kind.sense()).ok()
            });
            EvalLine {
                index: k,
                name: dataset.name(k).map(str::to_string),
                status: r.status,
                objective: r.objective,
                gap_percent: gap,
                detail: r.detail,
            }
        })
        .collect();
    println!("{:>5}  {:<12} {:>16} {:>9}  status", "#", "name", "objective", "gap %");
    for l in &lines {
        println!(
            "{:>5}  {:<12} {:>16} {:>9}  {}",
            l.index,
            l.name.as_deref().unwrap_or("-"),
            l.objective.map_or("-".into(), |q| format!("{q:.6}")),
            l.gap_percent.map_or("-".into(), |g| format!("{g:.3}")),
            match &l.detail {
                Some(d) => format!("{:?}: {d}", l.status),
                None => format!("{:?}", l.status),
            }
        );
    }
    let valid: Vec<f64> = lines.iter().filter_map(|l| l.objective).collect();
    let invalid = lines.len() - valid.len();
    let mean = (invalid == 0).then(|| valid.iter().sum::<f64>() / valid.len() as f64);
    let gaps: Vec<f64> = lines.iter().filter_map(|l| l.gap_percent).collect();
    let mean_gap = (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64);
    println!("valid {}/{}", valid.len(), lines.len());
    if let Some(m) = mean {
        println!("mean objective {m:.6}");
    }
    if let Some(g) = mean_gap {
        println!("mean gap {g:.3}%");
    }
    if let Some(path) = &a.json {
        let doc = json!({
            "bundle": a.bundle,
            "dataset": a.dataset,
            "valid": valid.len(),
            "invalid": invalid,
            "mean_objective": mean,
            "mean_gap_percent": mean_gap,
            "instances": lines,
        });
        fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    }
    Ok(if invalid == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

#[derive(Debug, Serialize)]
struct BaselineRow {
    baseline: String,
    mean_objective: f64,
    mean_magnitude: f64,
    mean_gap_percent: Option<f64>,
}

/// Mean objective and gap of each applicable baseline.
fn baseline_rows(dataset: &Dataset, optima: &BTreeMap<String, f64>) -> Result<Vec<BaselineRow>> {
    let kind = dataset.kind;
    let mut rows = Vec::new();
    for b in Baseline::for_kind(kind) {
        let mut total = 0.0;
        let mut gaps = Vec::new();
        for (k, inst) in dataset.instances.iter().enumerate() {
            let q = objective(inst, &baseline_solve(b, inst)?)?;
            total += q;
            if let Some(r) = reference(dataset, k, optima) {
                gaps.push(optimality_gap(magnitude(kind, q), r, kind.sense())?);
            }
        }
        let mean = total / dataset.len() as f64;
        rows.push(BaselineRow {
            baseline: b.name().to_string(),
            mean_objective: mean,
            mean_magnitude: magnitude(kind, mean),
            mean_gap_percent: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
        });
    }
    Ok(rows)
}

fn baselines(a: BaselineArgs) -> Result<ExitCode> {
    let dataset = Dataset::read(&a.dataset).with_context(|| format!("reading dataset {}", a.dataset.display()))?;
    let optima = load_optima(a.optima.as_deref())?;
    let rows = baseline_rows(&dataset, &optima)?;
    println!("{} instances of {}", dataset.len(), dataset.kind);
    println!("{:<18} {:>16} {:>14} {:>9}", "baseline", "mean objective", "mean size", "gap %");
    for r in &rows {
        println!(
            "{:<18} {:>16.6} {:>14.6} {:>9}",
            r.baseline,
            r.mean_objective,
            r.mean_magnitude,
            r.mean_gap_percent.map_or("-".into(), |g| format!("{g:.3}"))
        );
    }
    if let Some(path) = &a.json {
        fs::write(path, serde_json::to_string_pretty(&json!({ "dataset": a.dataset, "rows": rows }))?)?;
    }
    Ok(ExitCode::SUCCESS)
}
