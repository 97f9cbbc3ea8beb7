//! Model-based evaluation: one completion per (problem, model), scored with
//! the shared parse, verify and reward path.
//!
//! Completions are cached under `{run_dir}/{run_id}/{model_id}/{problem_id}.json`,
//! so a rerun with the same run id only queries pairs that are still missing.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::calibration::{CalibrationRecord, TierManifest};
use crate::parsing::{answer_json, format_number, Completion};
use crate::rewards::{TelemetryCategory, DEFAULT_LENGTH_THRESHOLD};
use crate::scoring::{canonical_completion, score_completion, ScoreOptions};
use crate::spatial::{Cardinal, RelativeTurn};
use crate::types::{GroundTruth, ProblemInstance, ProblemSpec, TaskFamily};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("model client `{model}` failed: {message}")]
    Client { model: String, message: String },
    #[error("invalid run config: {0}")]
    Config(String),
    #[error("unknown report format `{0}` (expected text, json or csv)")]
    Format(String),
    #[error("{path}: {message}")]
    Data { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Clients

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding { temperature: 0.0, max_tokens: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub problem_id: String,
    pub prompt: String,
    pub decoding: Decoding,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientOutput {
    pub text: String,
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ClientError(pub String);

/// A model endpoint. Implementations must not keep state between calls.
pub trait ModelClient: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, request: &CompletionRequest) -> Result<ClientOutput, ClientError>;
}

/// Offline behaviours for deterministic runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MockBehavior {
    /// Always the canonical correct answer.
    Oracle,
    /// Always an empty completion.
    Empty,
    /// Correct with probability `accuracy`, otherwise wrong, rambling or cut off.
    /// Choices hash (model id, problem id), so reruns are identical.
    Noisy { accuracy: f64 },
    /// Fixed text per problem id; anything unlisted gets an empty completion.
    Scripted { responses: HashMap<String, String> },
}

pub struct MockClient {
    model_id: String,
    behavior: MockBehavior,
    problems: Arc<HashMap<String, ProblemInstance>>,
}

impl MockClient {
    pub fn new(model_id: impl Into<String>, behavior: MockBehavior, problems: Arc<HashMap<String, ProblemInstance>>) -> Self {
        MockClient { model_id: model_id.into(), behavior, problems }
    }
}

fn unit_hash(parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("digest is 32 bytes"))
}

/// A plausible wrong answer of the right shape.
pub fn wrong_answer(truth: &GroundTruth) -> GroundTruth {
    use GroundTruth as G;
    match truth {
        G::Int { value } => G::Int { value: value + 1 },
        G::Real { value, decimals } => G::Real { value: value + 1.0, decimals: *decimals },
        G::VertexSet { nodes } => G::VertexSet { nodes: nudge(nodes) },
        G::NodeSequence { nodes } => G::NodeSequence { nodes: nudge(nodes) },
        G::EdgeSet { edges } => {
            let mut e = edges.clone();
            if e.pop().is_none() {
                e.push((0, 1));
            }
            G::EdgeSet { edges: e }
        }
        G::Partition { parts } => {
            let (mut a, mut b) = parts.clone();
            if let Some(x) = a.pop() {
                b.push(x);
            }
            G::Partition { parts: (a, b) }
        }
        G::Coordinate { x, y } => G::Coordinate { x: x + 1.0, y: *y },
        G::Orientation { value } => G::Orientation { value: Cardinal::from_index((value.index() + 1) % 4) },
        G::RelativeOrientation { value } => {
            let i = RelativeTurn::ALL.iter().position(|t| t == value).unwrap_or(0);
            G::RelativeOrientation { value: RelativeTurn::ALL[(i + 1) % 4] }
        }
    }
}

fn nudge(nodes: &[usize]) -> Vec<usize> {
    let mut v = nodes.to_vec();
    if v.pop().is_none() {
        v.push(0);
    }
    v
}

fn render_answer(family: TaskFamily, value: &GroundTruth, plain: bool) -> String {
    match (family, plain) {
        (TaskFamily::Counting, false) => format!("Answer: {}", format_number(value).unwrap_or_default()),
        (TaskFamily::Counting, true) => format!("The answer is {}.", format_number(value).unwrap_or_default()),
        (_, false) => format!("```json\n{}\n```", serde_json::json!({ "answer": answer_json(value) })),
        (_, true) => format!("The answer is {}", serde_json::json!({ "answer": answer_json(value) })),
    }
}

impl ModelClient for MockClient {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, request: &CompletionRequest) -> Result<ClientOutput, ClientError> {
        let problem = self.problems.get(&request.problem_id);
        let text = |s: String| Ok(ClientOutput { text: s, truncated: false });
        match &self.behavior {
            MockBehavior::Empty => text(String::new()),
            MockBehavior::Scripted { responses } => text(responses.get(&request.problem_id).cloned().unwrap_or_default()),
            MockBehavior::Oracle => {
                let p = problem.ok_or_else(|| ClientError(format!("unknown problem `{}`", request.problem_id)))?;
                text(canonical_completion(p))
            }
            MockBehavior::Noisy { accuracy } => {
                let p = problem.ok_or_else(|| ClientError(format!("unknown problem `{}`", request.problem_id)))?;
                let h = unit_hash(&[&self.model_id, &request.problem_id]);
                let u = (h >> 11) as f64 / (1u64 << 53) as f64;
                let plain = h & 0b11 == 0;
                if u < *accuracy {
                    return text(render_answer(p.family, &p.truth, plain));
                }
                match (h >> 2) % 8 {
                    0 => text("I need to think about this more carefully before answering.".into()),
                    1 => Ok(ClientOutput { text: "Let me enumerate every case.\nCase 1:".into(), truncated: true }),
                    _ => text(render_answer(p.family, &wrong_answer(&p.truth), plain)),
                }
            }
        }
    }
}

/// Generic JSON completion endpoint: POST `{model, prompt, temperature, max_tokens}`,
/// response `{text, truncated}`.
pub struct HttpModelClient {
    model_id: String,
    endpoint: String,
    api_key: Option<String>,
    min_interval: Duration,
    last_call: Mutex<Option<Instant>>,
    client: reqwest::blocking::Client,
}

impl HttpModelClient {
    pub fn new(
        model_id: impl Into<String>,
        endpoint: impl Into<String>,
        api_key_env: Option<&str>,
        timeout: Duration,
        min_interval: Duration,
    ) -> Result<Self, ClientError> {
        let client = reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| ClientError(e.to_string()))?;
        Ok(HttpModelClient {
            model_id: model_id.into(),
            endpoint: endpoint.into(),
            api_key: api_key_env.and_then(|v| std::env::var(v).ok()),
            min_interval,
            last_call: Mutex::new(None),
            client,
        })
    }

    fn pace(&self) {
        let mut last = self.last_call.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = *last {
            let since = t.elapsed();
            if since < self.min_interval {
                std::thread::sleep(self.min_interval - since);
            }
        }
        *last = Some(Instant::now());
    }
}

impl ModelClient for HttpModelClient {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn complete(&self, request: &CompletionRequest) -> Result<ClientOutput, ClientError> {
        self.pace();
        let body = serde_json::json!({
            "model": self.model_id,
            "prompt": request.prompt,
            "temperature": request.decoding.temperature,
            "max_tokens": request.decoding.max_tokens,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ClientError(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ClientError(format!("status {}", resp.status())));
        }
        resp.json().map_err(|e| ClientError(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, base_delay_ms: 500 }
    }
}

/// Calls `client` up to `policy.attempts` times with exponential backoff.
pub fn complete_with_retry(
    client: &dyn ModelClient,
    request: &CompletionRequest,
    policy: RetryPolicy,
) -> Result<ClientOutput, ClientError> {
    let mut delay = policy.base_delay_ms;
    let mut last = ClientError("no attempts made".into());
    for attempt in 0..policy.attempts.max(1) {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(delay));
            delay = delay.saturating_mul(2);
        }
        match client.complete(request) {
            Ok(out) => return Ok(out),
            Err(e) => last = e,
        }
    }
    Err(last)
}

// ---------------------------------------------------------------------------
// Roster files

/// One roster entry. In TOML: `[[model]]` tables with `id` and `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Oracle { id: String },
    Empty { id: String },
    Noisy { id: String, accuracy: f64 },
    Http {
        id: String,
        endpoint: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
        #[serde(default)]
        min_interval_ms: u64,
    },
}

fn default_timeout() -> f64 {
    120.0
}

impl ModelSpec {
    pub fn id(&self) -> &str {
        match self {
            ModelSpec::Oracle { id } | ModelSpec::Empty { id } | ModelSpec::Noisy { id, .. } | ModelSpec::Http { id, .. } => id,
        }
    }

    pub fn build(&self, problems: &Arc<HashMap<String, ProblemInstance>>) -> Result<Box<dyn ModelClient>, HarnessError> {
        let mock = |b| Box::new(MockClient::new(self.id(), b, problems.clone())) as Box<dyn ModelClient>;
        Ok(match self {
            ModelSpec::Oracle { .. } => mock(MockBehavior::Oracle),
            ModelSpec::Empty { .. } => mock(MockBehavior::Empty),
            ModelSpec::Noisy { accuracy, .. } => {
                if !(0.0..=1.0).contains(accuracy) {
                    return Err(HarnessError::Config(format!("model `{}`: accuracy {accuracy} not in [0, 1]", self.id())));
                }
                mock(MockBehavior::Noisy { accuracy: *accuracy })
            }
            ModelSpec::Http { id, endpoint, api_key_env, timeout_secs, min_interval_ms } => Box::new(
                HttpModelClient::new(
                    id.clone(),
                    endpoint.clone(),
                    api_key_env.as_deref(),
                    Duration::from_secs_f64(*timeout_secs),
                    Duration::from_millis(*min_interval_ms),
                )
                .map_err(|e| HarnessError::Client { model: id.clone(), message: e.0 })?,
            ),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterFile {
    pub model: Vec<ModelSpec>,
}

pub fn read_roster(path: impl AsRef<Path>) -> Result<Vec<ModelSpec>, HarnessError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let roster: RosterFile =
        toml::from_str(&text).map_err(|e| HarnessError::Data { path: path.display().to_string(), message: e.to_string() })?;
    Ok(roster.model)
}

// ---------------------------------------------------------------------------
// Runs

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Greedy decoding is enforced.
    Test,
    Calibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRunConfig {
    pub run_dir: PathBuf,
    pub run_id: String,
    pub mode: EvalMode,
    pub decoding: Decoding,
    /// Parallel client calls.
    pub concurrency: usize,
    pub retry: RetryPolicy,
    /// Stop after this many new client calls; rerun with the same run id to resume.
    pub max_requests: Option<usize>,
    pub length_threshold: usize,
}

impl Default for EvalRunConfig {
    fn default() -> Self {
        EvalRunConfig {
            run_dir: PathBuf::from("runs"),
            run_id: "run".into(),
            mode: EvalMode::Test,
            decoding: Decoding::default(),
            concurrency: 4,
            retry: RetryPolicy::default(),
            max_requests: None,
            length_threshold: DEFAULT_LENGTH_THRESHOLD,
        }
    }
}

impl EvalRunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.mode == EvalMode::Test && self.decoding.temperature != 0.0 {
            return Err(HarnessError::Config("test evaluation uses temperature 0".into()));
        }
        if self.concurrency == 0 {
            return Err(HarnessError::Config("concurrency must be at least 1".into()));
        }
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) {
            return Err(HarnessError::Config(format!("run id `{}` must be a plain directory name", self.run_id)));
        }
        Ok(())
    }

    pub fn run_path(&self) -> PathBuf {
        self.run_dir.join(&self.run_id)
    }
}

/// A persisted raw completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedCompletion {
    pub problem_id: String,
    pub model_id: String,
    pub text: String,
    pub truncated: bool,
}

/// One scored (problem, model) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub model_id: String,
    pub problem_id: String,
    pub family: TaskFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_kind: Option<String>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inference_error: bool,
    pub category: TelemetryCategory,
    pub reward: f64,
}

impl ScoredRecord {
    pub fn calibration_record(&self) -> CalibrationRecord {
        CalibrationRecord {
            problem_id: self.problem_id.clone(),
            model_id: self.model_id.clone(),
            passed: self.passed,
            inference_error: self.inference_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub records: Vec<ScoredRecord>,
    pub report: EvalReport,
    /// Present when the request budget stopped the run early.
    pub resume_token: Option<String>,
}

fn cache_path(run: &Path, model_id: &str, problem_id: &str) -> PathBuf {
    run.join(model_id).join(format!("{problem_id}.json"))
}

fn load_cached(path: &Path) -> Option<CachedCompletion> {
    serde_json::from_str(&fs::read_to_string(path).ok()?).ok()
}

/// Runs every roster model over every problem.
pub fn run_eval(
    config: &EvalRunConfig,
    problems: &[ProblemInstance],
    clients: &[Box<dyn ModelClient>],
) -> Result<EvalOutcome, HarnessError> {
    config.validate()?;
    let mut ids = std::collections::HashSet::new();
    for c in clients {
        if !ids.insert(c.model_id()) {
            return Err(HarnessError::Config(format!("model `{}` appears twice in the roster", c.model_id())));
        }
    }
    let run = config.run_path();
    for c in clients {
        fs::create_dir_all(run.join(c.model_id()))?;
    }

    // Pending pairs in canonical order: roster order, then dataset order.
    let mut pending = Vec::new();
    for (ci, c) in clients.iter().enumerate() {
        for (pi, p) in problems.iter().enumerate() {
            if load_cached(&cache_path(&run, c.model_id(), &p.id)).is_none() {
                pending.push((ci, pi));
            }
        }
    }
    let budget_hit = config.max_requests.is_some_and(|m| pending.len() > m);
    if let Some(m) = config.max_requests {
        pending.truncate(m);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let failures: Vec<(usize, usize, String)> = pool.install(|| {
        pending
            .par_iter()
            .filter_map(|&(ci, pi)| {
                let (client, problem) = (&clients[ci], &problems[pi]);
                let request =
                    CompletionRequest { problem_id: problem.id.clone(), prompt: problem.prompt.clone(), decoding: config.decoding };
                match complete_with_retry(client.as_ref(), &request, config.retry) {
                    Ok(out) => {
                        let cached = CachedCompletion {
                            problem_id: problem.id.clone(),
                            model_id: client.model_id().to_string(),
                            text: out.text,
                            truncated: out.truncated,
                        };
                        let path = cache_path(&run, client.model_id(), &problem.id);
                        let json = serde_json::to_string(&cached).expect("cache entries serialize");
                        match fs::write(&path, json) {
                            Ok(()) => None,
                            Err(e) => Some((ci, pi, format!("writing {}: {e}", path.display()))),
                        }
                    }
                    Err(e) => Some((ci, pi, e.0)),
                }
            })
            .collect()
    });
    if let Some((_, _, msg)) = failures.iter().find(|f| f.2.starts_with("writing ")) {
        return Err(HarnessError::Data { path: run.display().to_string(), message: msg.clone() });
    }
    let failed: std::collections::HashSet<(usize, usize)> = failures.iter().map(|f| (f.0, f.1)).collect();

    let opts = ScoreOptions { length_threshold: config.length_threshold, normalizer: None };
    let mut records = Vec::with_capacity(clients.len() * problems.len());
    for (ci, c) in clients.iter().enumerate() {
        for (pi, p) in problems.iter().enumerate() {
            let query_kind = match &p.spec {
                ProblemSpec::Spatial(s) => Some(s.query.kind().as_str().to_string()),
                _ => None,
            };
            if failed.contains(&(ci, pi)) {
                records.push(ScoredRecord {
                    model_id: c.model_id().to_string(),
                    problem_id: p.id.clone(),
                    family: p.family,
                    query_kind,
                    passed: false,
                    inference_error: true,
                    category: TelemetryCategory::ExtractionFailure,
                    reward: 0.0,
                });
                continue;
            }
            let Some(cached) = load_cached(&cache_path(&run, c.model_id(), &p.id)) else {
                continue;
            };
            let completion = Completion { text: cached.text, truncated: cached.truncated, ..Completion::default() };
            let outcome = score_completion(p, &completion, &opts);
            records.push(ScoredRecord {
                model_id: c.model_id().to_string(),
                problem_id: p.id.clone(),
                family: p.family,
                query_kind,
                passed: outcome.passed(),
                inference_error: false,
                category: outcome.reward.category,
                reward: outcome.reward.total,
            });
        }
    }

    let roster: Vec<String> = clients.iter().map(|c| c.model_id().to_string()).collect();
    let report = build_report(&records, &roster, None);
    write_jsonl(&run.join("scores.jsonl"), &records)?;
    let calib: Vec<CalibrationRecord> = records.iter().map(ScoredRecord::calibration_record).collect();
    write_jsonl(&run.join("records.jsonl"), &calib)?;
    fs::write(run.join("report.json"), render_report(&report, ReportFormat::Json))?;
    Ok(EvalOutcome { records, report, resume_token: budget_hit.then(|| config.run_id.clone()) })
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), HarnessError> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    for item in items {
        writeln!(w, "{}", serde_json::to_string(item).expect("records serialize"))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scored(path: impl AsRef<Path>) -> Result<Vec<ScoredRecord>, HarnessError> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| HarnessError::Data {
            path: path.display().to_string(),
            message: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub model_id: String,
    /// Family name, tier name or spatial query kind, depending on the table.
    pub group: String,
    pub problems: usize,
    pub passed: usize,
    pub pass_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: usize,
    pub by_family: Vec<RateRow>,
    pub by_tier: Vec<RateRow>,
    pub by_query_kind: Vec<RateRow>,
    pub categories: BTreeMap<TelemetryCategory, usize>,
    pub inference_errors: usize,
}

/// Pass-rate rows grouped by `key`, ordered by roster position (unknown
/// models last, by name), then group.
fn rate_rows<'a>(
    records: &'a [ScoredRecord],
    roster: &[String],
    key: impl Fn(&'a ScoredRecord) -> Option<String>,
) -> Vec<RateRow> {
    let order: HashMap<&str, usize> = roster.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    let mut acc: BTreeMap<(usize, &str, String), (usize, usize)> = BTreeMap::new();
    for r in records {
        let Some(group) = key(r) else { continue };
        let mi = order.get(r.model_id.as_str()).copied().unwrap_or(roster.len());
        let e = acc.entry((mi, r.model_id.as_str(), group)).or_default();
        e.0 += 1;
        e.1 += usize::from(r.passed);
    }
    acc.into_iter()
        .map(|((_, model, group), (problems, passed))| RateRow {
            model_id: model.to_string(),
            group,
            problems,
            passed,
            pass_rate: passed as f64 / problems as f64,
        })
        .collect()
}

/// Aggregates scored records. `roster` fixes model row order.
pub fn build_report(records: &[ScoredRecord], roster: &[String], tiers: Option<&TierManifest>) -> EvalReport {
    let mut categories: BTreeMap<TelemetryCategory, usize> = TelemetryCategory::ALL.iter().map(|&c| (c, 0)).collect();
    for r in records {
        *categories.entry(r.category).or_default() += 1;
    }
    EvalReport {
        records: records.len(),
        by_family: rate_rows(records, roster, |r| Some(r.family.as_str().to_string())),
        by_tier: match tiers {
            Some(t) => rate_rows(records, roster, |r| t.tier_of(&r.problem_id).map(|x| x.as_str().to_string())),
            None => Vec::new(),
        },
        by_query_kind: rate_rows(records, roster, |r| r.query_kind.clone()),
        categories,
        inference_errors: records.iter().filter(|r| r.inference_error).count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(HarnessError::Format(other.to_string())),
        }
    }
}

/// Column order of the CSV report (one row per model and family).
pub const CSV_COLUMNS: [&str; 5] = ["model_id", "family", "problems", "passed", "pass_rate"];

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_COLUMNS).expect("in-memory write");
            for r in &report.by_family {
                w.write_record([
                    r.model_id.as_str(),
                    r.group.as_str(),
                    &r.problems.to_string(),
                    &r.passed.to_string(),
                    &format!("{:.4}", r.pass_rate),
                ])
                .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
        }
        ReportFormat::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "records: {}  inference errors: {}", report.records, report.inference_errors);
            for (title, rows) in
                [("pass rate by family", &report.by_family), ("pass rate by tier", &report.by_tier), ("pass rate by query kind", &report.by_query_kind)]
            {
                if rows.is_empty() {
                    continue;
                }
                let _ = writeln!(s, "\n{title}");
                let _ = writeln!(s, "{:<24} {:<22} {:>8} {:>8} {:>9}", "model", "group", "problems", "passed", "rate");
                for r in rows.iter() {
                    let _ = writeln!(
                        s,
                        "{:<24} {:<22} {:>8} {:>8} {:>9.4}",
                        r.model_id, r.group, r.problems, r.passed, r.pass_rate
                    );
                }
            }
            let _ = writeln!(s, "\nreward categories");
            for (c, n) in &report.categories {
                let _ = writeln!(s, "{:<24} {:>8}", c.as_str(), n);
            }
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::{generate_counting, CountingConfig};
    use crate::spatial::{generate_spatial, SpatialConfig};

    fn problems() -> Vec<ProblemInstance> {
        let mut p = generate_counting(&CountingConfig { count: 20, seed: 1, ..CountingConfig::default() }).unwrap();
        p.extend(generate_spatial(&SpatialConfig { count: 20, seed: 1, ..SpatialConfig::default() }).unwrap());
        p
    }

    fn clients(problems: &[ProblemInstance], specs: &[ModelSpec]) -> Vec<Box<dyn ModelClient>> {
        let map = Arc::new(problems.iter().map(|p| (p.id.clone(), p.clone())).collect());
        specs.iter().map(|s| s.build(&map).unwrap()).collect()
    }

    #[test]
    fn oracle_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let ps = problems();
        let cs = clients(&ps, &[ModelSpec::Oracle { id: "oracle".into() }, ModelSpec::Empty { id: "empty".into() }]);
        let cfg = EvalRunConfig { run_dir: dir.path().into(), ..EvalRunConfig::default() };
        let out = run_eval(&cfg, &ps, &cs).unwrap();
        assert_eq!(out.records.len(), 80);
        for row in &out.report.by_family {
            assert_eq!(row.pass_rate, if row.model_id == "oracle" { 1.0 } else { 0.0 });
        }
        assert_eq!(out.report.categories[&TelemetryCategory::ExtractionFailure], 40);
        assert_eq!(out.report.categories[&TelemetryCategory::CorrectWellFormatted], 40);
    }

    #[test]
    fn budget_then_resume_matches_uninterrupted() {
        let ps = problems();
        let specs = [ModelSpec::Noisy { id: "a".into(), accuracy: 0.5 }, ModelSpec::Noisy { id: "b".into(), accuracy: 0.8 }];
        let full_dir = tempfile::tempdir().unwrap();
        let full =
            run_eval(&EvalRunConfig { run_dir: full_dir.path().into(), ..EvalRunConfig::default() }, &ps, &clients(&ps, &specs))
                .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = EvalRunConfig { run_dir: dir.path().into(), max_requests: Some(25), ..EvalRunConfig::default() };
        let partial = run_eval(&cfg, &ps, &clients(&ps, &specs)).unwrap();
        assert_eq!(partial.resume_token.as_deref(), Some("run"));
        assert_eq!(partial.records.len(), 25);
        let cfg = EvalRunConfig { max_requests: None, ..cfg };
        let resumed = run_eval(&cfg, &ps, &clients(&ps, &specs)).unwrap();
        assert_eq!(resumed.resume_token, None);
        assert_eq!(resumed.records, full.records);
    }

    #[test]
    fn csv_report_shape() {
        let empty = build_report(&[], &[], None);
        assert_eq!(render_report(&empty, ReportFormat::Csv), "model_id,family,problems,passed,pass_rate\n");
        assert!(matches!("xml".parse::<ReportFormat>(), Err(HarnessError::Format(_))));
    }

    #[test]
    fn test_mode_requires_greedy_decoding() {
        let cfg = EvalRunConfig { decoding: Decoding { temperature: 0.7, max_tokens: 10 }, ..EvalRunConfig::default() };
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
    }
}
