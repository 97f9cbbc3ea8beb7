//! Start the reward service on an ephemeral port, score one completion over
//! HTTP and print the metrics.
//!
//! cargo run --example service

use std::sync::Arc;

use rlvr_core::counting::{generate_counting, CountingConfig};
use rlvr_core::rewards::DEFAULT_LENGTH_THRESHOLD;
use rlvr_core::scoring::canonical_completion;
use rlvr_core::service::{bind, serve, ServiceState};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problems = generate_counting(&CountingConfig { count: 10, seed: 3, ..CountingConfig::default() })?;
    let first = problems[0].clone();
    let state = Arc::new(ServiceState::new(problems, DEFAULT_LENGTH_THRESHOLD, None)?);
    let (listener, addr) = bind("127.0.0.1:0".parse()?).await?;
    println!("listening on http://{addr}");
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(listener, state, async move {
        let _ = stopped.await;
    }));

    let (reward, metrics) = tokio::task::spawn_blocking(move || -> reqwest::Result<_> {
        let client = reqwest::blocking::Client::new();
        let body = serde_json::json!({"problem_id": first.id, "completion": canonical_completion(&first)});
        let reward: serde_json::Value = client.post(format!("http://{addr}/v1/reward")).json(&body).send()?.json()?;
        let metrics: serde_json::Value = client.get(format!("http://{addr}/v1/metrics")).send()?.json()?;
        Ok((reward, metrics))
    })
    .await??;
    println!("reward: {reward}");
    println!("metrics: {metrics}");

    let _ = stop.send(());
    server.await??;
    Ok(())
}
