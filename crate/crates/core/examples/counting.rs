//! Build the numbers 1..=100 pipeline by hand, then draw a seeded batch.
//!
//! cargo run --example counting

use rlvr_core::counting::{generate_counting, instance_from_spec, AggregateOp, CountingConfig, CountingSpec, PipelineStep};

fn main() {
    let spec = CountingSpec {
        range_lo: 1,
        range_hi: 100,
        pipeline: vec![PipelineStep::KeepEven, PipelineStep::KeepDivisibleBy { n: 3 }],
        final_op: AggregateOp::Count,
    };
    let inst = instance_from_spec(spec, 0, 0).expect("valid spec");
    println!("{}\n", inst.prompt);
    println!("truth: {:?}\n", inst.truth);

    let config = CountingConfig { count: 5, seed: 7, ..CountingConfig::default() };
    for inst in generate_counting(&config).expect("generation") {
        println!("{:<16} {:?}\n{:<16} truth {:?}", inst.id, inst.complexity, "", inst.truth);
    }
}
