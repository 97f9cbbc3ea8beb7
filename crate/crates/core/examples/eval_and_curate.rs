//! Evaluate a roster of mock models, derive difficulty tiers from their pass
//! rates and curate stratified subsets.
//!
//! cargo run --example eval_and_curate

use std::collections::HashMap;
use std::sync::Arc;

use rlvr_core::calibration::{compute_tiers, curate_splits, verify_manifest, CalibrationRecord, CurationPlan};
use rlvr_core::harness::{render_report, run_eval, EvalRunConfig, MockBehavior, MockClient, ModelClient, ReportFormat};
use rlvr_core::spatial::{generate_spatial, SpatialConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problems = generate_spatial(&SpatialConfig { count: 600, seed: 5, ..SpatialConfig::default() })?;
    let by_id = Arc::new(problems.iter().map(|p| (p.id.clone(), p.clone())).collect::<HashMap<_, _>>());
    let clients: Vec<Box<dyn ModelClient>> = vec![
        Box::new(MockClient::new("strong", MockBehavior::Noisy { accuracy: 0.95 }, by_id.clone())),
        Box::new(MockClient::new("medium", MockBehavior::Noisy { accuracy: 0.8 }, by_id.clone())),
        Box::new(MockClient::new("weak", MockBehavior::Noisy { accuracy: 0.3 }, by_id.clone())),
    ];
    let dir = tempfile_dir()?;
    let config = EvalRunConfig { run_dir: dir.clone(), run_id: "demo".into(), ..EvalRunConfig::default() };
    let outcome = run_eval(&config, &problems, &clients)?;
    print!("{}", render_report(&outcome.report, ReportFormat::Text));

    let records: Vec<CalibrationRecord> = outcome
        .records
        .iter()
        .map(|r| CalibrationRecord {
            problem_id: r.problem_id.clone(),
            model_id: r.model_id.clone(),
            passed: r.passed,
            inference_error: r.inference_error,
        })
        .collect();
    let roster: Vec<String> = clients.iter().map(|c| c.model_id().to_string()).collect();
    let tiers = compute_tiers(&records, &roster)?;
    let plan = CurationPlan { test_size: 90, easy_sizes: vec![100], mixed_sizes: vec![90], validation_size: 0, seed: 1 };
    let splits = curate_splits(&tiers, &plan)?;
    for (name, ids) in &splits.subsets {
        println!("{name:<10} {} problems", ids.len());
    }
    let report = verify_manifest(&splits, &tiers);
    println!("split checks passed: {}", report.all_passed());
    std::fs::remove_dir_all(dir)?;
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("rlvr-eval-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
