//! Score differently formatted completions against one problem of each
//! family and print the reward breakdown.
//!
//! cargo run --example rewards

use rlvr_core::counting::{generate_counting, CountingConfig};
use rlvr_core::graph::{generate_graphs, GraphConfig};
use rlvr_core::parsing::Completion;
use rlvr_core::scoring::{canonical_completion, score_completion, ScoreOptions};
use rlvr_core::spatial::{generate_spatial, SpatialConfig};

fn main() {
    let problems = [
        generate_counting(&CountingConfig { count: 1, seed: 1, ..CountingConfig::default() }).unwrap().remove(0),
        generate_graphs(&GraphConfig { count: 1, seed: 1, node_bounds: (6, 8), ..GraphConfig::default() }).unwrap().remove(0),
        generate_spatial(&SpatialConfig { count: 1, seed: 1, ..SpatialConfig::default() }).unwrap().remove(0),
    ];
    for p in &problems {
        let canonical = canonical_completion(p);
        let rambling = (1..=9).map(|i| format!("{i}. thinking")).collect::<Vec<_>>().join("\n") + "\n" + &canonical;
        let cases = [
            ("canonical", Completion::new(canonical.clone())),
            ("long reasoning", Completion::new(rambling)),
            ("no answer", Completion::new("I am not sure.")),
            ("cut off", Completion::truncated("1. First, list the")),
        ];
        println!("{} ({})", p.id, p.family);
        for (name, c) in cases {
            let r = score_completion(p, &c, &ScoreOptions::default()).reward;
            println!(
                "  {name:<15} total {:>5} = {} + {} + {} + {}  {:?}",
                r.total, r.correctness, r.format_bonus, r.step_penalty, r.length_penalty, r.category
            );
        }
    }
}
