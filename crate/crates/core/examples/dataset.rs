//! Write a generated batch as JSONL and load it back with full re-validation.
//!
//! cargo run --example dataset

use rlvr_core::dataset::{read_dataset, write_dataset};
use rlvr_core::spatial::{generate_spatial, SpatialConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let batch = generate_spatial(&SpatialConfig { count: 50, seed: 2, ..SpatialConfig::default() })?;
    let dir = std::env::temp_dir().join("rlvr-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("spatial.jsonl");
    let n = write_dataset(&batch, &path)?;
    let back = read_dataset(&path)?;
    assert_eq!(back, batch);
    println!("wrote and re-read {n} instances at {}", path.display());
    Ok(())
}
