//! The `rlvr` command line.
//!
//! Every subcommand accepts `--config FILE`: a TOML table whose keys are
//! flag names (`nodes_min = 8` or `nodes-min = 8`). Values from the file fill
//! in flags that were not given on the command line; explicit flags win.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 external-service error.

use std::collections::{HashMap, HashSet};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::calibration::{
    compute_tiers_with, curate_splits, read_records, roster_of, verify_manifest, CalibrationRecord, CurationPlan,
    SplitManifest, TierManifest, TierOptions, TierThresholds,
};
use crate::counting::{generate_counting, AggregateKind, CountingConfig, MAX_FILTERS, MAX_TRANSFORMS};
use crate::dataset::{read_dataset, read_dataset_with, write_dataset, write_dataset_to, Validation};
use crate::graph::{generate_graphs_with_stats, solve_exact, Budget, GraphConfig, GraphOperator, MAX_NODES, MIN_NODES};
use crate::harness::{
    build_report, read_roster, read_scored, render_report, run_eval, Decoding, EvalMode, EvalRunConfig, ReportFormat,
    RetryPolicy,
};
use crate::parsing::{Completion, HttpNormalizer, Normalizer, NORMALIZER_TIMEOUT};
use crate::rewards::DEFAULT_LENGTH_THRESHOLD;
use crate::scoring::{score_completion, ScoreOptions};
use crate::service::{bind, serve, ServiceState};
use crate::spatial::{generate_spatial, simulate, QueryKind, SpatialConfig};
use crate::types::{ComplexityMeta, ProblemInstance, ProblemSpec, TaskFamily};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    External(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::External(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::External(m) => m,
        }
    }
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "rlvr", version, about = "Generate, solve, verify and curate verifiable-reward tasks")]
pub struct Cli {
    /// TOML file of flag values; explicit flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Cap on worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset of problem instances as JSONL.
    Generate(GenerateArgs),
    /// Compute ground truth for problem specs or dataset instances.
    Solve(SolveArgs),
    /// Score completions against a dataset; one JSON result per line.
    Verify(VerifyArgs),
    /// Run model clients over a dataset and record pass/fail per pair.
    Eval(EvalArgs),
    /// Assign difficulty tiers from evaluation records.
    Calibrate(CalibrateArgs),
    /// Draw test, validation and training subsets from a tier manifest.
    Curate(CurateArgs),
    /// Run the HTTP reward service.
    Serve(ServeArgs),
    /// Render an evaluation report.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Counting,
    Graph,
    Spatial,
}

impl From<FamilyArg> for TaskFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Counting => TaskFamily::Counting,
            FamilyArg::Graph => TaskFamily::Graph,
            FamilyArg::Spatial => TaskFamily::Spatial,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSONL path.
    #[arg(long)]
    pub out: PathBuf,

    /// Counting: smallest starting range length.
    #[arg(long, default_value_t = 10)]
    pub range_min: i64,
    /// Counting: largest starting range length.
    #[arg(long, default_value_t = 10_000)]
    pub range_max: i64,
    #[arg(long, default_value_t = 1)]
    pub filters_min: usize,
    #[arg(long, default_value_t = MAX_FILTERS)]
    pub filters_max: usize,
    #[arg(long, default_value_t = 0)]
    pub transforms_min: usize,
    #[arg(long, default_value_t = MAX_TRANSFORMS)]
    pub transforms_max: usize,
    /// Counting: aggregate operators to draw from (comma separated, default all).
    #[arg(long, value_delimiter = ',')]
    pub aggregates: Vec<String>,

    /// Graph: fewest nodes.
    #[arg(long, default_value_t = MIN_NODES)]
    pub nodes_min: usize,
    /// Graph: most nodes (operators with exponential solvers cap this lower).
    #[arg(long, default_value_t = MAX_NODES)]
    pub nodes_max: usize,
    /// Graph: lowest edge density.
    #[arg(long, default_value_t = 0.1)]
    pub density_min: f64,
    /// Graph: highest edge density.
    #[arg(long, default_value_t = 0.4)]
    pub density_max: f64,
    /// Graph: operators to draw from (comma separated, default all).
    #[arg(long, value_delimiter = ',')]
    pub operators: Vec<String>,
    #[arg(long, default_value_t = 0.25)]
    pub directed_fraction: f64,
    #[arg(long, default_value_t = 0.25)]
    pub weighted_fraction: f64,
    /// Graph: solver step limit per instance.
    #[arg(long, default_value_t = 50_000_000)]
    pub max_solve_steps: u64,
    /// Graph: solver wall-clock limit per instance, in seconds.
    #[arg(long, default_value_t = 10.0)]
    pub time_limit: f64,

    /// Spatial: fewest actions.
    #[arg(long, default_value_t = 1)]
    pub actions_min: usize,
    /// Spatial: most actions.
    #[arg(long, default_value_t = 10)]
    pub actions_max: usize,
    #[arg(long, default_value_t = 2)]
    pub particles_min: usize,
    #[arg(long, default_value_t = 4)]
    pub particles_max: usize,
    /// Spatial: query kinds to draw from (comma separated, default all).
    #[arg(long, value_delimiter = ',')]
    pub queries: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Dataset JSONL, or JSONL of bare problem specs.
    #[arg(long)]
    pub input: PathBuf,
    /// Output path (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 50_000_000)]
    pub max_solve_steps: u64,
    #[arg(long, default_value_t = 60.0)]
    pub time_limit: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// JSONL of `{problem_id, completion, truncated}`, one per dataset line, same order.
    #[arg(long)]
    pub completions: PathBuf,
    /// Output path (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Graph completions longer than this many characters are penalised.
    #[arg(long, default_value_t = DEFAULT_LENGTH_THRESHOLD)]
    pub length_threshold: usize,
    /// Answer normalizer endpoint for failed JSON extractions.
    #[arg(long)]
    pub normalizer_url: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Test,
    Calibration,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// TOML roster: `[[model]]` tables with `id` and `kind` (oracle, empty, noisy, http).
    #[arg(long)]
    pub roster: PathBuf,
    #[arg(long, default_value = "runs")]
    pub run_dir: PathBuf,
    /// Reuse an id to resume an interrupted run.
    #[arg(long, default_value = "run")]
    pub run_id: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Test)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 4096)]
    pub max_tokens: u32,
    /// Parallel client calls.
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    /// Stop after this many new client calls.
    #[arg(long)]
    pub max_requests: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_LENGTH_THRESHOLD)]
    pub length_threshold: usize,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Record JSONL files (`{problem_id, model_id, passed}`); merged, duplicates rejected.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub records: Vec<PathBuf>,
    /// Model ids that must appear for every problem (default: all ids in the records).
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    #[arg(long, default_value_t = 0.67)]
    pub easy_threshold: f64,
    #[arg(long, default_value_t = 0.34)]
    pub medium_threshold: f64,
    /// Leave failed inferences out of the pass-rate denominator.
    #[arg(long)]
    pub exclude_inference_errors: bool,
    /// Output tier manifest (JSON).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Tier manifest from `calibrate`.
    #[arg(long)]
    pub tiers: PathBuf,
    /// `default`, or a JSON/TOML plan file.
    #[arg(long, default_value = "default")]
    pub plan: String,
    /// Family whose default test size applies (500 for graph, else 200).
    #[arg(long, value_enum, default_value_t = FamilyArg::Counting)]
    pub family: FamilyArg,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub validation_size: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub easy_sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub mixed_sizes: Option<Vec<usize>>,
    /// Output split manifest (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Re-check an existing split manifest instead of curating.
    #[arg(long)]
    pub check: Option<PathBuf>,
    /// With --dataset and --subset-out, write one subset's instances as JSONL.
    #[arg(long)]
    pub subset: Option<String>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub subset_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "RLVR_SERVICE_BIND", default_value = "127.0.0.1:8080")]
    pub bind: std::net::SocketAddr,
    /// Overrides the port of --bind (0 picks a free port).
    #[arg(long, env = "RLVR_SERVICE_PORT")]
    pub port: Option<u16>,
    #[arg(long = "dataset", env = "RLVR_SERVICE_DATASETS", value_delimiter = ',', required = true)]
    pub datasets: Vec<PathBuf>,
    #[arg(long, env = "RLVR_SERVICE_LENGTH_THRESHOLD", default_value_t = DEFAULT_LENGTH_THRESHOLD)]
    pub length_threshold: usize,
    #[arg(long, env = "RLVR_SERVICE_NORMALIZER_URL")]
    pub normalizer_url: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `scores.jsonl` written by `eval`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Adds a per-tier table.
    #[arg(long)]
    pub tiers: Option<PathBuf>,
    #[arg(long, default_value = "text")]
    pub format: String,
    /// Output path (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Entry

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match parse_with_overlay(&args) {
        Ok(cli) => cli,
        Err(ParseOutcome::Clap(e)) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
        Err(ParseOutcome::Error(e)) => {
            eprintln!("error: {}", e.message());
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn main() -> ! {
    std::process::exit(run_from(std::env::args_os()))
}

enum ParseOutcome {
    Clap(clap::Error),
    Error(CliError),
}

fn parse_with_overlay(args: &[OsString]) -> Result<Cli, ParseOutcome> {
    let cmd = Cli::command();
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let config = strs.iter().enumerate().skip(1).find_map(|(i, a)| {
        if a == "--config" {
            strs.get(i + 1).map(PathBuf::from)
        } else {
            a.strip_prefix("--config=").map(PathBuf::from)
        }
    });
    let sub = strs.iter().skip(1).find_map(|a| cmd.find_subcommand(a));
    let mut full = args.to_vec();
    if let (Some(path), Some(sub)) = (config, sub) {
        full.extend(overlay_args(&cmd, sub, &strs, &path).map_err(ParseOutcome::Error)?);
    }
    let matches = cmd.try_get_matches_from(full).map_err(ParseOutcome::Clap)?;
    Cli::from_arg_matches(&matches).map_err(ParseOutcome::Clap)
}

fn toml_scalar(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Flags (as argv fragments) for config keys not already given on the
/// command line or through the environment.
fn overlay_args(cmd: &clap::Command, sub: &clap::Command, argv: &[String], path: &Path) -> Result<Vec<OsString>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("reading config {}: {e}", path.display())))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| usage(format!("parsing config {}: {e}", path.display())))?;
    let known_anywhere: HashSet<String> =
        cmd.get_subcommands().flat_map(|s| s.get_arguments().map(|a| a.get_id().to_string())).collect();
    let mut extra = Vec::new();
    for (key, value) in &table {
        let id = key.replace('-', "_");
        if id == "config" || id == "jobs" {
            continue;
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_id().as_str() == id) else {
            if known_anywhere.contains(&id) {
                continue;
            }
            return Err(usage(format!("config {}: unknown key `{key}`", path.display())));
        };
        let Some(long) = arg.get_long() else { continue };
        let flag = format!("--{long}");
        let given = argv.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        let from_env = arg.get_env().is_some_and(|e| std::env::var_os(e).is_some());
        if given || from_env {
            continue;
        }
        let takes_value = arg.get_action().takes_values();
        match value {
            toml::Value::Boolean(b) if !takes_value => {
                if *b {
                    extra.push(flag.into());
                }
            }
            toml::Value::Array(items) => {
                let parts: Option<Vec<String>> = items.iter().map(toml_scalar).collect();
                let parts = parts.ok_or_else(|| usage(format!("config key `{key}`: arrays must hold scalars")))?;
                extra.push(flag.into());
                extra.push(parts.join(",").into());
            }
            other => {
                let v = toml_scalar(other).ok_or_else(|| usage(format!("config key `{key}`: unsupported value")))?;
                extra.push(flag.into());
                extra.push(v.into());
            }
        }
    }
    Ok(extra)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if cli.jobs > 0 {
        // Ignore the error if a pool already exists (e.g. repeated in-process calls).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    }
    match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Eval(a) => cmd_eval(a, cli.jobs),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Curate(a) => cmd_curate(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, content).map_err(|e| data(format!("writing {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes()).map_err(data)?;
            stdout.flush().map_err(data)
        }
    }
}

fn parse_list<T: std::str::FromStr>(items: &[String], what: &str) -> Result<Option<Vec<T>>, CliError>
where
    T::Err: std::fmt::Display,
{
    if items.is_empty() {
        return Ok(None);
    }
    items
        .iter()
        .map(|s| s.trim().parse::<T>().map_err(|e| usage(format!("{what} `{s}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

// ---------------------------------------------------------------------------
// Commands

/// Histogram of the main complexity knob, e.g. `nodes 5:3 6:4`.
pub fn complexity_histogram(instances: &[ProblemInstance]) -> String {
    let mut hist: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    let mut label = "";
    for inst in instances {
        let (name, key) = match &inst.complexity {
            ComplexityMeta::Counting { total_steps, .. } => ("steps", *total_steps),
            ComplexityMeta::Graph { n_nodes, .. } => ("nodes", *n_nodes),
            ComplexityMeta::Spatial { n_actions, .. } => ("actions", *n_actions),
        };
        label = name;
        *hist.entry(key).or_default() += 1;
    }
    if hist.is_empty() {
        return "empty".into();
    }
    let body: Vec<String> = hist.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    format!("{label} {}", body.join(" "))
}

fn cmd_generate(a: GenerateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let family: TaskFamily = a.family.into();
    let instances = match family {
        TaskFamily::Counting => {
            let mut config = CountingConfig {
                count: a.count,
                range_scale_bounds: (a.range_min, a.range_max),
                filter_bounds: (a.filters_min, a.filters_max),
                transform_bounds: (a.transforms_min, a.transforms_max),
                seed: a.seed,
                ..CountingConfig::default()
            };
            if let Some(ops) = parse_list::<AggregateKind>(&a.aggregates, "aggregate")? {
                config.operator_whitelist = ops;
            }
            config.validate().map_err(usage)?;
            generate_counting(&config).map_err(data)?
        }
        TaskFamily::Graph => {
            let mut config = GraphConfig {
                count: a.count,
                node_bounds: (a.nodes_min, a.nodes_max),
                edge_density_bounds: (a.density_min, a.density_max),
                directed_fraction: a.directed_fraction,
                weighted_fraction: a.weighted_fraction,
                seed: a.seed,
                max_solve_steps: a.max_solve_steps,
                time_limit_secs: a.time_limit,
                ..GraphConfig::default()
            };
            if let Some(ops) = parse_list::<GraphOperator>(&a.operators, "operator")? {
                config.operator_whitelist = ops;
            }
            config.validate().map_err(usage)?;
            let (out, stats) = generate_graphs_with_stats(&config).map_err(data)?;
            eprintln!(
                "graph draws {}: {} duplicates, {} disconnected, {} over budget of {} solved",
                stats.draws, stats.duplicates, stats.disconnected, stats.budget_failures, stats.solve_attempts
            );
            out
        }
        TaskFamily::Spatial => {
            let mut config = SpatialConfig {
                count: a.count,
                action_count_bounds: (a.actions_min, a.actions_max),
                particle_count_bounds: (a.particles_min, a.particles_max),
                seed: a.seed,
                ..SpatialConfig::default()
            };
            if let Some(q) = parse_list::<QueryKind>(&a.queries, "query kind")? {
                config.query_mix = q;
            }
            config.validate().map_err(usage)?;
            generate_spatial(&config).map_err(data)?
        }
    };
    write_dataset(&instances, &a.out).map_err(data)?;
    println!(
        "generated {} {family} instances in {:.2}s -> {} ({})",
        instances.len(),
        started.elapsed().as_secs_f64(),
        a.out.display(),
        complexity_histogram(&instances)
    );
    Ok(())
}

/// A solve input line: a dataset instance or a bare spec.
#[derive(Deserialize)]
#[serde(untagged)]
enum SolveInput {
    Instance(Box<ProblemInstance>),
    Spec(ProblemSpec),
}

#[derive(Serialize)]
struct SolveOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    family: TaskFamily,
    truth: crate::types::GroundTruth,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<crate::graph::Objective>,
}

fn cmd_solve(a: SolveArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.input).map_err(|e| data(format!("reading {}: {e}", a.input.display())))?;
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let input: SolveInput =
            serde_json::from_str(line).map_err(|e| data(format!("{} line {}: {e}", a.input.display(), i + 1)))?;
        let (id, spec) = match input {
            SolveInput::Instance(inst) => (Some(inst.id), inst.spec),
            SolveInput::Spec(spec) => (None, spec),
        };
        let fail = |e: String| data(format!("{} line {}: {e}", a.input.display(), i + 1));
        let result = match &spec {
            ProblemSpec::Counting(s) => SolveOutput {
                id,
                family: TaskFamily::Counting,
                truth: crate::counting::evaluate_counting(s).map_err(|e| fail(e.to_string()))?,
                value: None,
            },
            ProblemSpec::Spatial(s) => {
                s.validate().map_err(|e| fail(e.to_string()))?;
                SolveOutput { id, family: TaskFamily::Spatial, truth: simulate(s), value: None }
            }
            ProblemSpec::Graph(g) => {
                let budget = Budget::new(a.max_solve_steps, Some(std::time::Duration::from_secs_f64(a.time_limit)));
                let sol = solve_exact(g, &budget).map_err(|e| fail(e.to_string()))?;
                SolveOutput { id, family: TaskFamily::Graph, truth: sol.witness, value: Some(sol.value) }
            }
        };
        out.push_str(&serde_json::to_string(&result).expect("solve output serializes"));
        out.push('\n');
    }
    write_output(a.out.as_deref(), &out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletionLine {
    #[serde(default)]
    pub problem_id: Option<String>,
    pub completion: String,
    #[serde(default)]
    pub truncated: bool,
}

fn normalizer_from(url: &Option<String>) -> Result<Option<Arc<dyn Normalizer>>, CliError> {
    url.as_ref()
        .map(|u| {
            HttpNormalizer::new(u.clone(), NORMALIZER_TIMEOUT)
                .map(|n| Arc::new(n) as Arc<dyn Normalizer>)
                .map_err(|e| CliError::External(e.to_string()))
        })
        .transpose()
}

fn cmd_verify(a: VerifyArgs) -> Result<(), CliError> {
    let dataset = read_dataset_with(&a.dataset, Validation::Structural).map_err(data)?;
    let text = fs::read_to_string(&a.completions).map_err(|e| data(format!("reading {}: {e}", a.completions.display())))?;
    let lines: Vec<CompletionLine> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| data(format!("{} line {}: {e}", a.completions.display(), i + 1))))
        .collect::<Result<_, _>>()?;
    if lines.len() != dataset.len() {
        return Err(data(format!("{} completions for {} dataset instances", lines.len(), dataset.len())));
    }
    let mismatches: Vec<String> = dataset
        .iter()
        .zip(&lines)
        .enumerate()
        .filter_map(|(i, (inst, c))| match &c.problem_id {
            Some(id) if *id != inst.id => Some(format!("line {}: expected `{}`, found `{id}`", i + 1, inst.id)),
            _ => None,
        })
        .collect();
    if !mismatches.is_empty() {
        let shown: Vec<&str> = mismatches.iter().take(5).map(String::as_str).collect();
        return Err(data(format!(
            "completion ids do not match the dataset ({} mismatches): {}",
            mismatches.len(),
            shown.join("; ")
        )));
    }
    let normalizer = normalizer_from(&a.normalizer_url)?;
    let opts = ScoreOptions { length_threshold: a.length_threshold, normalizer: normalizer.as_deref() };
    let mut out = String::new();
    let mut correct = 0;
    for (inst, c) in dataset.iter().zip(lines) {
        let outcome =
            score_completion(inst, &Completion { text: c.completion, truncated: c.truncated, ..Completion::default() }, &opts);
        correct += usize::from(outcome.passed());
        let line = serde_json::json!({
            "problem_id": outcome.problem_id,
            "verdict": outcome.verdict,
            "category": outcome.reward.category,
            "reward": outcome.reward,
            "parsed": outcome.parsed,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    write_output(a.out.as_deref(), &out)?;
    eprintln!("scored {} completions, {correct} correct", dataset.len());
    Ok(())
}

fn cmd_eval(a: EvalArgs, jobs: usize) -> Result<(), CliError> {
    let problems = read_dataset_with(&a.dataset, Validation::Structural).map_err(data)?;
    let roster = read_roster(&a.roster).map_err(usage)?;
    if roster.is_empty() {
        return Err(usage("roster lists no models"));
    }
    let map: Arc<HashMap<String, ProblemInstance>> = Arc::new(problems.iter().map(|p| (p.id.clone(), p.clone())).collect());
    let clients = roster.iter().map(|m| m.build(&map)).collect::<Result<Vec<_>, _>>().map_err(|e| CliError::External(e.to_string()))?;
    let concurrency = if jobs > 0 { a.concurrency.min(jobs) } else { a.concurrency };
    let config = EvalRunConfig {
        run_dir: a.run_dir,
        run_id: a.run_id,
        mode: match a.mode {
            ModeArg::Test => EvalMode::Test,
            ModeArg::Calibration => EvalMode::Calibration,
        },
        decoding: Decoding { temperature: a.temperature, max_tokens: a.max_tokens },
        concurrency,
        retry: RetryPolicy { attempts: a.retries, ..RetryPolicy::default() },
        max_requests: a.max_requests,
        length_threshold: a.length_threshold,
    };
    config.validate().map_err(usage)?;
    let outcome = run_eval(&config, &problems, &clients).map_err(data)?;
    print!("{}", render_report(&outcome.report, ReportFormat::Text));
    println!("outputs in {}", config.run_path().display());
    if let Some(token) = outcome.resume_token {
        println!("request budget reached; rerun with --run-id {token} to resume");
    }
    if outcome.report.inference_errors > 0 {
        return Err(CliError::External(format!(
            "{} completions failed after retries (recorded as not passed)",
            outcome.report.inference_errors
        )));
    }
    Ok(())
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<(), CliError> {
    let mut records: Vec<CalibrationRecord> = Vec::new();
    for path in &a.records {
        records.extend(read_records(path).map_err(|e| data(format!("{}: {e}", path.display())))?);
    }
    let roster = if a.models.is_empty() { roster_of(&records) } else { a.models.clone() };
    let opts = TierOptions {
        thresholds: TierThresholds { easy: a.easy_threshold, medium: a.medium_threshold },
        exclude_inference_errors: a.exclude_inference_errors,
    };
    opts.thresholds.validate().map_err(usage)?;
    let manifest = compute_tiers_with(&records, &roster, opts).map_err(data)?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifests serialize") + "\n";
    fs::write(&a.out, json).map_err(|e| data(format!("writing {}: {e}", a.out.display())))?;
    let [e, m, h] = manifest.tier_counts();
    println!("{} problems, {} models: easy {e}, medium {m}, hard {h} -> {}", manifest.problems.len(), roster.len(), a.out.display());
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| data(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn cmd_curate(a: CurateArgs) -> Result<(), CliError> {
    let manifest: TierManifest = read_json(&a.tiers)?;
    let splits = if let Some(check) = &a.check {
        read_json::<SplitManifest>(check)?
    } else {
        let mut plan = if a.plan == "default" {
            CurationPlan::default_for(a.family.into())
        } else {
            let path = Path::new(&a.plan);
            let text = fs::read_to_string(path).map_err(|e| usage(format!("reading plan {}: {e}", path.display())))?;
            if path.extension().is_some_and(|e| e == "toml") {
                toml::from_str(&text).map_err(|e| usage(format!("plan {}: {e}", path.display())))?
            } else {
                serde_json::from_str(&text).map_err(|e| usage(format!("plan {}: {e}", path.display())))?
            }
        };
        if let Some(s) = a.seed {
            plan.seed = s;
        }
        if let Some(s) = a.test_size {
            plan.test_size = s;
        }
        if let Some(s) = a.validation_size {
            plan.validation_size = s;
        }
        if let Some(s) = a.easy_sizes.clone() {
            plan.easy_sizes = s;
        }
        if let Some(s) = a.mixed_sizes.clone() {
            plan.mixed_sizes = s;
        }
        let splits = curate_splits(&manifest, &plan).map_err(data)?;
        let json = serde_json::to_string_pretty(&splits).expect("splits serialize") + "\n";
        write_output(a.out.as_deref(), &json)?;
        splits
    };
    let report = verify_manifest(&splits, &manifest);
    for c in &report.checks {
        eprintln!("{} {}{}", if c.passed { "ok  " } else { "FAIL" }, c.name, if c.detail.is_empty() { String::new() } else { format!(": {}", c.detail) });
    }
    if !report.all_passed() {
        return Err(data(format!("{} split checks failed", report.failures().count())));
    }
    if let Some(name) = &a.subset {
        let (Some(dataset), Some(out)) = (&a.dataset, &a.subset_out) else {
            return Err(usage("--subset needs --dataset and --subset-out"));
        };
        let ids = splits.subsets.get(name).ok_or_else(|| usage(format!("no subset named `{name}`")))?;
        let wanted: HashSet<&String> = ids.iter().collect();
        let all = read_dataset(dataset).map_err(data)?;
        let picked: Vec<ProblemInstance> = all.into_iter().filter(|p| wanted.contains(&p.id)).collect();
        if picked.len() != ids.len() {
            return Err(data(format!("dataset {} holds {} of the {} ids in `{name}`", dataset.display(), picked.len(), ids.len())));
        }
        let file = fs::File::create(out).map_err(|e| data(format!("writing {}: {e}", out.display())))?;
        write_dataset_to(&picked, std::io::BufWriter::new(file)).map_err(data)?;
        eprintln!("wrote {} instances of `{name}` to {}", picked.len(), out.display());
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<(), CliError> {
    let mut addr = a.bind;
    if let Some(p) = a.port {
        addr.set_port(p);
    }
    let config = crate::service::ServiceConfig {
        bind: addr,
        datasets: a.datasets,
        length_threshold: a.length_threshold,
        normalizer_url: a.normalizer_url,
    };
    let state = Arc::new(ServiceState::load(&config).map_err(data)?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(data)?;
    runtime.block_on(async move {
        let (listener, local) = bind(config.bind).await.map_err(|e| CliError::External(format!("binding {}: {e}", config.bind)))?;
        println!("listening on http://{local} ({} problems)", state.problem_count());
        let _ = std::io::stdout().flush();
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        serve(listener, state, shutdown).await.map_err(|e| CliError::External(e.to_string()))
    })
}

fn cmd_report(a: ReportArgs) -> Result<(), CliError> {
    let format: ReportFormat = a.format.parse().map_err(usage)?;
    let records = read_scored(&a.scores).map_err(data)?;
    let tiers: Option<TierManifest> = a.tiers.as_deref().map(read_json).transpose()?;
    let mut roster: Vec<String> = Vec::new();
    for r in &records {
        if !roster.contains(&r.model_id) {
            roster.push(r.model_id.clone());
        }
    }
    let report = build_report(&records, &roster, tiers.as_ref());
    write_output(a.out.as_deref(), &render_report(&report, format))
}
