//! Procedural task generation with verifiable ground truth, answer
//! extraction, reward shaping and difficulty curation for three task
//! families: counting pipelines, graph optimization and grid-world spatial
//! reasoning.

pub mod calibration;
pub mod cli;
pub mod counting;
pub mod dataset;
pub mod graph;
pub mod harness;
pub mod parsing;
pub mod rewards;
pub mod rng;
pub mod scoring;
pub mod service;
pub mod spatial;
pub mod types;

pub use types::{DifficultyTier, GroundTruth, ProblemInstance, ProblemSpec, TaskFamily};
