//! Simulate a two-particle scene with a board rotation.
//!
//! cargo run --example spatial

use rlvr_core::types::ComplexityMeta;
use rlvr_core::spatial::{
    generate_spatial, instance_from_problem, simulate, Action, Board, Cardinal, Half, MoveDirection, Particle, Query,
    SpatialConfig, SpatialProblem, Turn,
};

fn main() {
    let problem = SpatialProblem {
        board: Board::default(),
        particles: vec![
            Particle { id: "P1".into(), position: (Half::from_units(2), Half::from_units(3)), orientation: Cardinal::North },
            Particle { id: "P2".into(), position: (Half::from_units(-1), Half::from_units(0)), orientation: Cardinal::East },
        ],
        actions: vec![
            Action::ParticleMove { id: "P1".into(), direction: MoveDirection::Forward, steps: 2 },
            Action::ParticleTurn { id: "P2".into(), turn: Turn::Left },
            Action::BoardRotate { quarter_turns: 1 },
        ],
        query: Query::RelativeLocation { a: "P1".into(), b: "P2".into() },
    };
    println!("P1 relative to P2: {:?}", simulate(&problem));
    let inst = instance_from_problem(problem, 0, 0).expect("valid scene");
    println!("\n{}\n", inst.prompt);

    for inst in generate_spatial(&SpatialConfig { count: 4, seed: 11, ..SpatialConfig::default() }).expect("generation") {
        if let ComplexityMeta::Spatial { n_actions, query_kind } = inst.complexity {
            println!("{:<12} {n_actions:>2} actions, {query_kind:?} -> {:?}", inst.id, inst.truth);
        }
    }
}
