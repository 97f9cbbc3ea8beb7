//! Solve a small independent set problem, check a few answers, then
//! generate a mixed batch and report each optimum.
//!
//! cargo run --example graph

use rlvr_core::graph::{generate_graphs_with_stats, solve_exact, verify_value, Budget, Edge, GraphConfig, GraphOperator, GraphProblem};
use rlvr_core::{GroundTruth, ProblemSpec};

fn main() {
    let problem = GraphProblem {
        n_nodes: 5,
        edges: vec![Edge { u: 0, v: 2, w: 1 }, Edge { u: 0, v: 4, w: 1 }],
        directed: false,
        weighted: false,
        operator: GraphOperator::MaximumIndependentSet,
        k: None,
    };
    let sol = solve_exact(&problem, &Budget::unlimited()).expect("tiny instance");
    println!("optimum {:?}, witness {:?}", sol.value, sol.witness);
    for nodes in [vec![4, 3, 2, 1], vec![0, 1, 3], vec![0, 2, 4]] {
        let v = verify_value(&problem, &sol, &GroundTruth::VertexSet { nodes: nodes.clone() });
        println!("  {nodes:?} -> {:?} ({})", v.verdict, v.detail);
    }

    let config = GraphConfig { count: 8, seed: 3, node_bounds: (6, 12), ..GraphConfig::default() };
    let (batch, stats) = generate_graphs_with_stats(&config).expect("generation");
    for inst in &batch {
        let ProblemSpec::Graph(p) = &inst.spec else { unreachable!() };
        println!("{:<12} {:<32} n={:<3} {:?}", inst.id, p.operator.to_string(), p.n_nodes, inst.truth);
    }
    println!("{} draws, {} duplicates, {} disconnected", stats.draws, stats.duplicates, stats.disconnected);
}
