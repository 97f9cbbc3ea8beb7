//! JSON-over-HTTP reward service.
//!
//! Routes live under `/v1/`. Problem views never include the ground truth,
//! and verification responses carry only the verdict and the parsed answer
//! (the verifier's free-text detail can name the optimum, so it stays
//! server-side).

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{read_dataset_with, DatasetError, Validation};
use crate::graph::Verdict;
use crate::parsing::{Completion, HttpNormalizer, Normalizer, ParsedAnswer, NORMALIZER_TIMEOUT};
use crate::rewards::{RewardBreakdown, TelemetryCategory, DEFAULT_LENGTH_THRESHOLD};
use crate::scoring::{score_completion, ScoreOptions, ScoreOutcome};
use crate::types::{ComplexityMeta, ProblemInstance, TaskFamily};

/// Version tag included in every response body.
pub const API_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("problem id `{0}` appears in more than one dataset")]
    DuplicateId(String),
    #[error("normalizer setup failed: {0}")]
    Normalizer(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub datasets: Vec<PathBuf>,
    pub length_threshold: usize,
    /// Optional answer normalizer endpoint for failed JSON extractions.
    pub normalizer_url: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            datasets: Vec::new(),
            length_threshold: DEFAULT_LENGTH_THRESHOLD,
            normalizer_url: None,
        }
    }
}

const N_CATEGORIES: usize = TelemetryCategory::ALL.len();

/// Shared, read-only problem store plus monotone counters.
pub struct ServiceState {
    problems: HashMap<String, ProblemInstance>,
    counters: [[AtomicU64; N_CATEGORIES]; 3],
    length_threshold: usize,
    normalizer: Option<Arc<dyn Normalizer>>,
}

fn family_index(f: TaskFamily) -> usize {
    TaskFamily::ALL.iter().position(|&x| x == f).expect("family listed")
}

impl ServiceState {
    pub fn new(problems: Vec<ProblemInstance>, length_threshold: usize, normalizer: Option<Arc<dyn Normalizer>>) -> Result<Self, ServiceError> {
        let mut map = HashMap::with_capacity(problems.len());
        for p in problems {
            let id = p.id.clone();
            if map.insert(id.clone(), p).is_some() {
                return Err(ServiceError::DuplicateId(id));
            }
        }
        Ok(ServiceState { problems: map, counters: Default::default(), length_threshold, normalizer })
    }

    /// Loads every dataset in `config` (structural validation).
    pub fn load(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let mut all = Vec::new();
        for path in &config.datasets {
            all.extend(read_dataset_with(path, Validation::Structural)?);
        }
        let normalizer = match &config.normalizer_url {
            Some(url) => Some(Arc::new(
                HttpNormalizer::new(url.clone(), NORMALIZER_TIMEOUT).map_err(|e| ServiceError::Normalizer(e.to_string()))?,
            ) as Arc<dyn Normalizer>),
            None => None,
        };
        Self::new(all, config.length_threshold, normalizer)
    }

    pub fn problem_count(&self) -> usize {
        self.problems.len()
    }

    fn score(&self, id: &str, text: String, truncated: bool) -> Option<ScoreOutcome> {
        let problem = self.problems.get(id)?;
        let opts = ScoreOptions { length_threshold: self.length_threshold, normalizer: self.normalizer.as_deref() };
        let outcome = score_completion(problem, &Completion { text, truncated, ..Completion::default() }, &opts);
        self.counters[family_index(problem.family)][outcome.reward.category.index()].fetch_add(1, Ordering::Relaxed);
        Some(outcome)
    }

    pub fn metrics(&self) -> Metrics {
        let mut categories = std::collections::BTreeMap::new();
        let mut total = 0;
        for (fi, f) in TaskFamily::ALL.iter().enumerate() {
            let row: std::collections::BTreeMap<TelemetryCategory, u64> = TelemetryCategory::ALL
                .iter()
                .map(|&c| {
                    let n = self.counters[fi][c.index()].load(Ordering::Relaxed);
                    total += n;
                    (c, n)
                })
                .collect();
            categories.insert(*f, row);
        }
        Metrics { version: API_VERSION, scored: total, categories }
    }
}

// ---------------------------------------------------------------------------
// Wire types

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemView {
    pub version: u32,
    pub id: String,
    pub family: TaskFamily,
    pub prompt: String,
    pub complexity: ComplexityMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRequest {
    pub problem_id: String,
    pub completion: String,
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardResponse {
    pub version: u32,
    pub problem_id: String,
    #[serde(flatten)]
    pub reward: RewardBreakdown,
    /// The configured normalizer was unreachable; scored without fallback.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalizer_unavailable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyResponse {
    pub version: u32,
    pub problem_id: String,
    pub verdict: Verdict,
    pub parsed: ParsedAnswer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRequest {
    pub problem_ids: Vec<String>,
    pub completions: Vec<BatchCompletion>,
}

/// A batch item: plain text, or text with a truncation flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchCompletion {
    Text(String),
    Full {
        text: String,
        #[serde(default)]
        truncated: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchItem {
    Scored(RewardResponse),
    Failed(ErrorBody),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResponse {
    pub version: u32,
    pub results: Vec<BatchItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub version: u32,
    /// Completions scored since start-up.
    pub scored: u64,
    pub categories: std::collections::BTreeMap<TaskFamily, std::collections::BTreeMap<TelemetryCategory, u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub version: u32,
    pub status: u16,
    pub error: String,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { version: API_VERSION, status: self.0.as_u16(), error: self.1 };
        (self.0, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        let status = match r {
            JsonRejection::MissingJsonContentType(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, r.body_text())
    }
}

fn not_found(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("unknown problem id `{id}`"))
}

type Shared = Arc<ServiceState>;

async fn health(State(state): State<Shared>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "version": API_VERSION, "status": "ok", "problems": state.problem_count() }))
}

async fn problem(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<ProblemView>, ApiError> {
    let p = state.problems.get(&id).ok_or_else(|| not_found(&id))?;
    Ok(Json(ProblemView {
        version: API_VERSION,
        id: p.id.clone(),
        family: p.family,
        prompt: p.prompt.clone(),
        complexity: p.complexity.clone(),
    }))
}

/// Scoring may block on the normalizer, so it runs off the async workers.
async fn score_blocking(state: Shared, req: RewardRequest) -> Result<ScoreOutcome, ApiError> {
    let id = req.problem_id.clone();
    tokio::task::spawn_blocking(move || state.score(&req.problem_id, req.completion, req.truncated))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .ok_or_else(|| not_found(&id))
}

fn reward_response(o: ScoreOutcome) -> RewardResponse {
    RewardResponse {
        version: API_VERSION,
        problem_id: o.problem_id,
        reward: o.reward,
        normalizer_unavailable: o.normalizer_unavailable,
    }
}

async fn reward(
    State(state): State<Shared>,
    body: Result<Json<RewardRequest>, JsonRejection>,
) -> Result<Json<RewardResponse>, ApiError> {
    let Json(req) = body?;
    Ok(Json(reward_response(score_blocking(state, req).await?)))
}

async fn verify(
    State(state): State<Shared>,
    body: Result<Json<RewardRequest>, JsonRejection>,
) -> Result<Json<VerifyResponse>, ApiError> {
    let Json(req) = body?;
    let o = score_blocking(state, req).await?;
    Ok(Json(VerifyResponse { version: API_VERSION, problem_id: o.problem_id, verdict: o.verdict, parsed: o.parsed }))
}

async fn batch_score(
    State(state): State<Shared>,
    body: Result<Json<BatchRequest>, JsonRejection>,
) -> Result<Json<BatchResponse>, ApiError> {
    let Json(req) = body?;
    if req.problem_ids.len() != req.completions.len() {
        return Err(ApiError(
            StatusCode::BAD_REQUEST,
            format!("{} problem ids but {} completions", req.problem_ids.len(), req.completions.len()),
        ));
    }
    let mut results = Vec::with_capacity(req.problem_ids.len());
    for (id, c) in req.problem_ids.into_iter().zip(req.completions) {
        let (text, truncated) = match c {
            BatchCompletion::Text(t) => (t, false),
            BatchCompletion::Full { text, truncated } => (text, truncated),
        };
        results.push(match score_blocking(state.clone(), RewardRequest { problem_id: id, completion: text, truncated }).await {
            Ok(o) => BatchItem::Scored(reward_response(o)),
            Err(ApiError(status, error)) => BatchItem::Failed(ErrorBody { version: API_VERSION, status: status.as_u16(), error }),
        });
    }
    Ok(Json(BatchResponse { version: API_VERSION, results }))
}

async fn metrics(State(state): State<Shared>) -> Json<Metrics> {
    Json(state.metrics())
}

async fn fallback() -> ApiError {
    ApiError(StatusCode::NOT_FOUND, "no such route".into())
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/problems/{id}", get(problem))
        .route("/v1/reward", post(reward))
        .route("/v1/verify", post(verify))
        .route("/v1/batch_score", post(batch_score))
        .route("/v1/metrics", get(metrics))
        .fallback(fallback)
        .with_state(state)
}

/// Binds the listener; the returned address has the real port when `bind` used port 0.
pub async fn bind(addr: SocketAddr) -> std::io::Result<(tokio::net::TcpListener, SocketAddr)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    Ok((listener, local))
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Shared,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
