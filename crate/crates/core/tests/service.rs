use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use rlvr_core::counting::{instance_from_spec, AggregateOp, CountingSpec, PipelineStep};
use rlvr_core::graph::{generate_graphs, GraphConfig};
use rlvr_core::rewards::DEFAULT_LENGTH_THRESHOLD;
use rlvr_core::scoring::{canonical_completion, score_completion, ScoreOptions};
use rlvr_core::service::{bind, router, serve, RewardResponse, ServiceState};
use rlvr_core::parsing::Completion;
use rlvr_core::spatial::{generate_spatial, SpatialConfig};
use rlvr_core::ProblemInstance;

fn fixtures() -> Vec<ProblemInstance> {
    let spec = CountingSpec {
        range_lo: 1,
        range_hi: 100,
        pipeline: vec![PipelineStep::KeepEven, PipelineStep::KeepDivisibleBy { n: 3 }],
        final_op: AggregateOp::Count,
    };
    let mut out = vec![instance_from_spec(spec, 0, 0).unwrap()];
    out.extend(generate_graphs(&GraphConfig { count: 5, seed: 2, node_bounds: (5, 8), ..GraphConfig::default() }).unwrap());
    out.extend(generate_spatial(&SpatialConfig { count: 5, seed: 2, ..SpatialConfig::default() }).unwrap());
    out
}

fn app() -> (Router, Arc<ServiceState>, Vec<ProblemInstance>) {
    let problems = fixtures();
    let state = Arc::new(ServiceState::new(problems.clone(), DEFAULT_LENGTH_THRESHOLD, None).unwrap());
    (router(state.clone()), state, problems)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call_raw(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn call_raw(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

#[tokio::test]
async fn reward_for_worked_example() {
    let (app, _, _) = app();
    let (status, body) =
        call(&app, "POST", "/v1/reward", Some(json!({"problem_id": "counting-0-0", "completion": "Answer: 16"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["version"], 1);
    assert_eq!(body["total"], 1.1);
    assert_eq!(body["category"], "CorrectWellFormatted");
}

#[tokio::test]
async fn reward_matches_library_exactly() {
    let (app, _, problems) = app();
    for p in &problems {
        for text in [canonical_completion(p), "no idea".to_string(), format!("1.\n2.\n3.\n4.\n5.\n6.\n7.\n{}", canonical_completion(p))] {
            let (status, raw) =
                call_raw(&app, "POST", "/v1/reward", Some(json!({"problem_id": p.id, "completion": text}))).await;
            assert_eq!(status, StatusCode::OK);
            let got: RewardResponse = serde_json::from_slice(&raw).unwrap();
            let want = score_completion(p, &Completion::new(text), &ScoreOptions::default()).reward;
            assert_eq!(got.reward, want, "{}", p.id);
            // Re-serialising the decoded payload reproduces it byte for byte.
            assert_eq!(serde_json::to_vec(&got).unwrap(), raw);
        }
    }
}

#[tokio::test]
async fn problem_view_hides_truth() {
    let (app, _, problems) = app();
    for p in &problems {
        let (status, body) = call(&app, "GET", &format!("/v1/problems/{}", p.id), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body["prompt"], p.prompt.as_str());
        let obj = body.as_object().unwrap();
        assert!(!obj.contains_key("truth") && !obj.contains_key("spec"), "{body}");
    }
}

#[tokio::test]
async fn errors_have_json_bodies() {
    let (app, _, _) = app();
    let (status, body) = call(&app, "GET", "/v1/problems/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["status"], 404);
    let (status, _) = call(&app, "POST", "/v1/reward", Some(json!({"problem_id": "nope", "completion": ""}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, body) = call(&app, "POST", "/v1/reward", Some(json!({"completion": 3}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().len() > 3);
    let (status, _) = call(&app, "GET", "/v2/health", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let resp = app
        .clone()
        .oneshot(Request::builder().method("POST").uri("/v1/reward").body(Body::from("{}")).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::UNSUPPORTED_MEDIA_TYPE);
}

#[tokio::test]
async fn verify_reports_verdict() {
    let (app, _, problems) = app();
    let g = &problems[1];
    let (status, body) =
        call(&app, "POST", "/v1/verify", Some(json!({"problem_id": g.id, "completion": canonical_completion(g)}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["verdict"], "correct");
    let (_, body) = call(&app, "POST", "/v1/verify", Some(json!({"problem_id": g.id, "completion": "?"}))).await;
    assert_eq!(body["verdict"], "invalid");
}

#[tokio::test]
async fn batch_scoring() {
    let (app, _, problems) = app();
    let ids: Vec<&str> = problems.iter().map(|p| p.id.as_str()).chain(["missing"]).collect();
    let mut completions: Vec<Value> = problems.iter().map(|p| json!(canonical_completion(p))).collect();
    completions.push(json!({"text": "Answer: 1", "truncated": true}));
    let (status, body) =
        call(&app, "POST", "/v1/batch_score", Some(json!({"problem_ids": ids, "completions": completions}))).await;
    assert_eq!(status, StatusCode::OK);
    let results = body["results"].as_array().unwrap();
    assert_eq!(results.len(), problems.len() + 1);
    for (r, p) in results.iter().zip(&problems) {
        let want = if p.family == rlvr_core::TaskFamily::Spatial { 1.0 } else { 1.1 };
        assert_eq!(r["total"], want, "{}", p.id);
    }
    assert_eq!(results.last().unwrap()["status"], 404);

    let (status, _) =
        call(&app, "POST", "/v1/batch_score", Some(json!({"problem_ids": ["a", "b"], "completions": ["x"]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_are_all_counted() {
    let (app, state, problems) = app();
    let mut tasks = Vec::new();
    for i in 0..1000 {
        let app = app.clone();
        let p = &problems[i % problems.len()];
        let body = json!({"problem_id": p.id, "completion": if i % 2 == 0 { canonical_completion(p) } else { "?".into() }});
        tasks.push(tokio::spawn(async move { call(&app, "POST", "/v1/reward", Some(body)).await.0 }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    let m = state.metrics();
    assert_eq!(m.scored, 1000);
    let sum: u64 = m.categories.values().flat_map(|row| row.values()).sum();
    assert_eq!(sum, 1000);
    let (_, body) = call(&app, "GET", "/v1/metrics", None).await;
    assert_eq!(body["scored"], 1000);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn serves_over_tcp_on_an_ephemeral_port() {
    let state = Arc::new(ServiceState::new(fixtures(), DEFAULT_LENGTH_THRESHOLD, None).unwrap());
    let (listener, addr) = bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    assert_ne!(addr.port(), 0);
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(listener, state, async move {
        let _ = rx.await;
    }));
    let body = tokio::task::spawn_blocking(move || {
        reqwest::blocking::Client::new()
            .post(format!("http://{addr}/v1/reward"))
            .json(&json!({"problem_id": "counting-0-0", "completion": "Answer: 16"}))
            .send()
            .unwrap()
            .json::<Value>()
            .unwrap()
    })
    .await
    .unwrap();
    assert_eq!(body["total"], 1.1);
    tx.send(()).unwrap();
    server.await.unwrap().unwrap();
}
