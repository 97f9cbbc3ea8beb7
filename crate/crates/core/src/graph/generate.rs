//! Random graph instances with exact ground truth.
//!
//! Candidates are drawn sequentially from one seeded stream and solved in
//! fixed-size batches on the rayon pool; results are consumed in draw order,
//! so the output never depends on thread count.

use std::collections::HashSet;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    complexity, render_graph_prompt, solve_exact, Budget, Edge, GraphError, GraphOperator, GraphProblem, SolveError,
    MAX_NODES, MAX_WEIGHT, MIN_NODES,
};
use crate::rng::{seeded_rng, SeededRng};
use crate::types::{instance_id, ProblemInstance, ProblemSpec, TaskFamily};

const BATCH: usize = 32;
/// Budget-rate check starts after this many solve attempts.
const MIN_ATTEMPTS_FOR_RATE: usize = 20;
const ATTEMPTS_PER_INSTANCE: usize = 200;

#[derive(Debug, Error)]
pub enum GraphGenError {
    #[error("invalid graph config: {0}")]
    Config(String),
    #[error(
        "{failures} of {attempts} solves exceeded the per-instance budget; \
         lower node_bounds or edge_density_bounds, or raise the budget"
    )]
    BudgetRate { attempts: usize, failures: usize },
    #[error("could not produce instance {ordinal} within the attempt budget")]
    GenerationBudget { ordinal: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub count: usize,
    pub node_bounds: (usize, usize),
    /// Fraction of possible edges present, drawn uniformly per instance.
    pub edge_density_bounds: (f64, f64),
    pub operator_whitelist: Vec<GraphOperator>,
    /// Probability that an instance is directed, for operators that allow it.
    pub directed_fraction: f64,
    /// Probability that an instance is weighted, for operators that allow it.
    pub weighted_fraction: f64,
    pub seed: u64,
    /// Deterministic solver step limit per instance.
    pub max_solve_steps: u64,
    /// Wall-clock safety limit per instance, in seconds.
    pub time_limit_secs: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            count: 100,
            node_bounds: (MIN_NODES, MAX_NODES),
            edge_density_bounds: (0.1, 0.4),
            operator_whitelist: GraphOperator::ALL.to_vec(),
            directed_fraction: 0.25,
            weighted_fraction: 0.25,
            seed: 0,
            max_solve_steps: 50_000_000,
            time_limit_secs: 10.0,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<(), GraphGenError> {
        let (lo, hi) = self.node_bounds;
        if lo < MIN_NODES || lo > hi || hi > MAX_NODES {
            return Err(GraphGenError::Config(format!(
                "node_bounds ({lo}, {hi}) must satisfy {MIN_NODES} <= min <= max <= {MAX_NODES}"
            )));
        }
        let (dlo, dhi) = self.edge_density_bounds;
        if !(dlo > 0.0 && dlo <= dhi && dhi <= 1.0) {
            return Err(GraphGenError::Config(format!("edge_density_bounds ({dlo}, {dhi}) must satisfy 0 < min <= max <= 1")));
        }
        if self.operator_whitelist.is_empty() {
            return Err(GraphGenError::Config("operator whitelist is empty".into()));
        }
        for (name, f) in [("directed_fraction", self.directed_fraction), ("weighted_fraction", self.weighted_fraction)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(GraphGenError::Config(format!("{name} {f} must lie in [0, 1]")));
            }
        }
        if self.max_solve_steps == 0 || !(self.time_limit_secs > 0.0) {
            return Err(GraphGenError::Config("solve budget must be positive".into()));
        }
        Ok(())
    }

    fn budget(&self) -> Budget {
        Budget::new(self.max_solve_steps, Some(Duration::from_secs_f64(self.time_limit_secs)))
    }
}

/// Builds a dataset instance from a problem, solving it under `budget`.
pub fn instance_from_problem(
    problem: GraphProblem,
    seed: u64,
    ordinal: usize,
    budget: &Budget,
) -> Result<ProblemInstance, SolveError> {
    let solution = solve_exact(&problem, budget)?;
    Ok(ProblemInstance {
        id: instance_id(TaskFamily::Graph, seed, ordinal),
        family: TaskFamily::Graph,
        prompt: render_graph_prompt(&problem),
        complexity: complexity(&problem),
        spec: ProblemSpec::Graph(problem),
        truth: solution.witness,
        seed,
    })
}

/// One candidate draw; `None` means "draw again" (no edges).
fn draw_problem(config: &GraphConfig, rng: &mut SeededRng) -> Option<GraphProblem> {
    let op = config.operator_whitelist[rng.gen_range(0..config.operator_whitelist.len())];
    let directed = op.allows_directed() && rng.gen_bool(config.directed_fraction);
    let weighted = op.allows_weights() && rng.gen_bool(config.weighted_fraction);
    let n = rng.gen_range(config.node_bounds.0..=config.node_bounds.1).min(op.node_cap(directed));
    let mut pairs: Vec<(usize, usize)> = if directed {
        (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v))).collect()
    } else {
        (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect()
    };
    let density = rng.gen_range(config.edge_density_bounds.0..=config.edge_density_bounds.1);
    let m = ((density * pairs.len() as f64).round() as usize).min(pairs.len());
    if m == 0 {
        return None;
    }
    pairs.shuffle(rng);
    pairs.truncate(m);
    pairs.sort_unstable();
    let edges = pairs
        .into_iter()
        .map(|(u, v)| Edge { u, v, w: if weighted { rng.gen_range(1..=MAX_WEIGHT) } else { 1 } })
        .collect();
    let k = (op == GraphOperator::DensestKSubgraph).then(|| rng.gen_range(3..n));
    Some(GraphProblem { n_nodes: n, edges, directed, weighted, operator: op, k })
}

/// Counters from one generation run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphGenStats {
    pub draws: usize,
    pub duplicates: usize,
    pub solve_attempts: usize,
    pub budget_failures: usize,
    pub disconnected: usize,
}

/// Generates `config.count` distinct graph instances.
pub fn generate_graphs(config: &GraphConfig) -> Result<Vec<ProblemInstance>, GraphGenError> {
    generate_graphs_with_stats(config).map(|(out, _)| out)
}

/// Like [`generate_graphs`], also returning rejection counters.
pub fn generate_graphs_with_stats(config: &GraphConfig) -> Result<(Vec<ProblemInstance>, GraphGenStats), GraphGenError> {
    config.validate()?;
    let mut stats = GraphGenStats::default();
    let mut rng = seeded_rng(config.seed);
    let mut seen: HashSet<GraphProblem> = HashSet::new();
    let mut out: Vec<ProblemInstance> = Vec::with_capacity(config.count);
    let (mut draws, mut attempts, mut failures) = (0usize, 0usize, 0usize);
    let max_draws = config.count.saturating_mul(ATTEMPTS_PER_INSTANCE).max(1_000);
    while out.len() < config.count {
        let mut batch = Vec::with_capacity(BATCH);
        while batch.len() < BATCH {
            if draws == max_draws {
                return Err(GraphGenError::GenerationBudget { ordinal: out.len() });
            }
            draws += 1;
            if let Some(p) = draw_problem(config, &mut rng) {
                if seen.insert(p.clone()) {
                    batch.push(p);
                } else {
                    stats.duplicates += 1;
                }
            }
        }
        let solved: Vec<Result<ProblemInstance, SolveError>> = batch
            .into_par_iter()
            .map(|p| instance_from_problem(p, config.seed, 0, &config.budget()))
            .collect();
        for result in solved {
            if out.len() == config.count {
                break;
            }
            match result {
                Ok(mut inst) => {
                    attempts += 1;
                    inst.id = instance_id(TaskFamily::Graph, config.seed, out.len());
                    out.push(inst);
                }
                // Distance operators need a (strongly) connected graph; redraw.
                Err(SolveError::Disconnected(_)) => stats.disconnected += 1,
                Err(SolveError::BudgetExceeded) => {
                    attempts += 1;
                    failures += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
        if attempts >= MIN_ATTEMPTS_FOR_RATE && failures * 2 > attempts {
            return Err(GraphGenError::BudgetRate { attempts, failures });
        }
    }
    stats.draws = draws;
    stats.solve_attempts = attempts;
    stats.budget_failures = failures;
    Ok((out, stats))
}
