mod common;

use proptest::prelude::*;

use rlvr_core::calibration::stratified_quotas;
use rlvr_core::counting::{evaluate_counting, AggregateOp, CountingSpec, PipelineStep};
use rlvr_core::dataset::{read_dataset_from, write_dataset_to, Validation};
use rlvr_core::graph::{generate_graphs, GraphConfig, GraphOperator};
use rlvr_core::parsing::{answer_json, values_match, Completion, MatchOptions};
use rlvr_core::rewards::reward_bounds;
use rlvr_core::scoring::{canonical_completion, score_completion, ScoreOptions};
use rlvr_core::spatial::{
    generate_spatial, instance_from_problem, simulate, Action, Board, Cardinal, Half, MoveDirection, Particle, Query,
    SpatialConfig, SpatialProblem, Turn,
};
use rlvr_core::{GroundTruth, ProblemInstance, ProblemSpec, TaskFamily};

fn filter() -> impl Strategy<Value = PipelineStep> {
    prop_oneof![
        Just(PipelineStep::KeepEven),
        Just(PipelineStep::KeepOdd),
        Just(PipelineStep::KeepPositive),
        Just(PipelineStep::KeepNegative),
        (2i64..10).prop_map(|n| PipelineStep::KeepDivisibleBy { n }),
        (-50i64..50).prop_map(|t| PipelineStep::KeepBelow { t }),
        (-50i64..50).prop_map(|t| PipelineStep::KeepAbove { t }),
    ]
}

fn transform() -> impl Strategy<Value = PipelineStep> {
    prop_oneof![
        (-9i64..10).prop_filter("non-zero", |k| *k != 0).prop_map(|k| PipelineStep::AddConstant { k }),
        (-5i64..6).prop_filter("non-zero", |k| *k != 0).prop_map(|k| PipelineStep::MultiplyConstant { k }),
        Just(PipelineStep::Negate),
        Just(PipelineStep::Square),
        Just(PipelineStep::AbsoluteValue),
        (2i64..12).prop_map(|m| PipelineStep::ModuloConstant { m }),
    ]
}

fn aggregate() -> impl Strategy<Value = AggregateOp> {
    prop_oneof![
        Just(AggregateOp::Count),
        Just(AggregateOp::UniqueCount),
        Just(AggregateOp::ZeroCount),
        Just(AggregateOp::EvenCount),
        Just(AggregateOp::OddCount),
        Just(AggregateOp::PositiveCount),
        Just(AggregateOp::NegativeCount),
        (2i64..10).prop_map(|n| AggregateOp::DivisibleByNCount { n }),
        (-50i64..50).prop_map(|t| AggregateOp::BelowThresholdCount { t }),
        (-50i64..50).prop_map(|t| AggregateOp::AboveThresholdCount { t }),
        Just(AggregateOp::Sum),
        Just(AggregateOp::Product),
        Just(AggregateOp::Mean),
        Just(AggregateOp::Median),
        Just(AggregateOp::Mode),
        Just(AggregateOp::Min),
        Just(AggregateOp::Max),
        Just(AggregateOp::Range),
        Just(AggregateOp::BitwiseAnd),
        Just(AggregateOp::BitwiseOr),
        Just(AggregateOp::BitwiseXor),
        Just(AggregateOp::BitwiseNand),
    ]
}

prop_compose! {
    fn counting_spec()(
        lo in -60i64..60,
        len in 0i64..80,
        filters in prop::collection::vec(filter(), 1..=4),
        transforms in prop::collection::vec(transform(), 0..=3),
        order in any::<u64>(),
        final_op in aggregate(),
    ) -> CountingSpec {
        // Interleave filters and transforms, keeping a filter somewhere in the pipeline.
        let mut pipeline = Vec::new();
        let (mut f, mut t) = (filters.into_iter(), transforms.into_iter());
        let mut bits = order;
        loop {
            let pick_filter = bits & 1 == 0;
            bits >>= 1;
            let next = if pick_filter { f.next().or_else(|| t.next()) } else { t.next().or_else(|| f.next()) };
            match next {
                Some(step) => pipeline.push(step),
                None => break,
            }
        }
        CountingSpec { range_lo: lo, range_hi: lo + len, pipeline, final_op }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn counting_matches_naive_evaluation(spec in counting_spec()) {
        if let Ok(truth) = evaluate_counting(&spec) {
            prop_assert_eq!(Some(truth), common::naive_counting(&spec));
        }
    }
}

fn particle_id(i: usize) -> String {
    format!("P{}", i + 1)
}

prop_compose! {
    fn spatial_problem()(n in 2usize..=4)(
        positions in prop::collection::vec((-18i64..=18, -18i64..=18, 0usize..4), n),
        actions in prop::collection::vec((0u8..4, 0usize..n, 0u32..=10, 0u8..6, -8i64..=8, -8i64..=8), 1..=20),
        query in (0u8..4, 0usize..n, 1usize..n),
        n in Just(n),
    ) -> SpatialProblem {
        let particles = positions
            .iter()
            .enumerate()
            .map(|(i, &(x, y, o))| Particle { id: particle_id(i), position: (Half(x), Half(y)), orientation: Cardinal::ALL[o] })
            .collect();
        let actions = actions
            .into_iter()
            .map(|(kind, who, steps, sub, dx, dy)| match kind {
                0 => Action::ParticleMove {
                    id: particle_id(who),
                    direction: if sub % 2 == 0 { MoveDirection::Forward } else { MoveDirection::Backward },
                    steps: steps.max(1),
                },
                1 => Action::ParticleTurn { id: particle_id(who), turn: [Turn::Left, Turn::Right, Turn::Around][sub as usize % 3] },
                2 => Action::BoardTranslate { dx: Half(dx), dy: Half(dy) },
                _ => Action::BoardRotate { quarter_turns: 1 + sub % 3 },
            })
            .collect();
        let (kind, a, off) = query;
        let (a, b) = (particle_id(a), particle_id((a + off) % n));
        let query = match kind {
            0 => Query::AbsoluteLocation { id: a },
            1 => Query::AbsoluteOrientation { id: a },
            2 => Query::RelativeLocation { a, b },
            _ => Query::RelativeOrientation { a, b },
        };
        SpatialProblem { board: Board::default(), particles, actions, query }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3000))]

    #[test]
    fn spatial_matches_float_simulation(p in spatial_problem()) {
        prop_assume!(p.validate().is_ok());
        prop_assert_eq!(simulate(&p), common::float_simulate(&p));
    }

    #[test]
    fn full_board_turn_is_identity(p in spatial_problem()) {
        prop_assume!(p.validate().is_ok());
        let mut turned = p.clone();
        for _ in 0..4 {
            turned.actions.push(Action::BoardRotate { quarter_turns: 1 });
        }
        // Four quarter turns about the (possibly shifted) centre bring every particle home.
        prop_assert_eq!(simulate(&turned), simulate(&p));
    }

    #[test]
    fn spatial_instances_score_their_canonical_answer(p in spatial_problem()) {
        prop_assume!(p.validate().is_ok());
        let inst = instance_from_problem(p, 0, 0).unwrap();
        let out = score_completion(&inst, &Completion::new(canonical_completion(&inst)), &ScoreOptions::default());
        prop_assert_eq!(out.reward.total, 1.0);
    }
}

fn fixtures() -> &'static [ProblemInstance] {
    static CELL: std::sync::OnceLock<Vec<ProblemInstance>> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let mut v = rlvr_core::counting::generate_counting(&rlvr_core::counting::CountingConfig {
            count: 20,
            seed: 5,
            ..Default::default()
        })
        .unwrap();
        v.extend(generate_graphs(&GraphConfig { count: 20, seed: 5, node_bounds: (5, 9), ..GraphConfig::default() }).unwrap());
        v.extend(generate_spatial(&SpatialConfig { count: 20, seed: 5, ..SpatialConfig::default() }).unwrap());
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1500))]

    #[test]
    fn rewards_stay_in_bounds_for_any_text(idx in 0usize..60, text in ".{0,400}", truncated in any::<bool>()) {
        let inst = &fixtures()[idx];
        let completion = Completion { text, truncated, ..Completion::default() };
        let r = score_completion(inst, &completion, &ScoreOptions::default()).reward;
        let (lo, hi) = reward_bounds(inst.family);
        prop_assert!(r.total >= lo - 1e-9 && r.total <= hi + 1e-9, "{} out of [{lo}, {hi}]", r.total);
        let sum = r.correctness + r.format_bonus + r.step_penalty + r.length_penalty;
        prop_assert!((sum - r.total).abs() < 1e-9);
    }

    #[test]
    fn canonical_answer_survives_surrounding_noise(idx in 0usize..60, noise in "[a-z ,.]{0,120}") {
        let inst = &fixtures()[idx];
        let text = format!("{noise}\n{}", canonical_completion(inst));
        let out = score_completion(inst, &Completion::new(text), &ScoreOptions::default());
        prop_assert!(out.reward.correctness > 0.0, "{}: {:?}", inst.id, out.parsed);
    }

    #[test]
    fn quotas_partition_the_size(size in 0usize..100_000) {
        let q = stratified_quotas(size);
        prop_assert_eq!(q.iter().sum::<usize>(), size);
        prop_assert!(q.iter().max().unwrap() - q.iter().min().unwrap() <= 1);
        prop_assert!(q[0] >= q[1] && q[1] >= q[2]);
    }

    #[test]
    fn half_serde_roundtrip(units in -10_000i64..10_000) {
        let h = Half(units);
        let json = serde_json::to_string(&h).unwrap();
        prop_assert_eq!(serde_json::from_str::<Half>(&json).unwrap(), h);
    }

    #[test]
    fn vertex_sets_match_in_any_order(mut nodes in prop::collection::vec(0usize..30, 0..10), seed in any::<u64>()) {
        nodes.sort_unstable();
        nodes.dedup();
        let truth = GroundTruth::VertexSet { nodes: nodes.clone() };
        let mut shuffled = nodes;
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rlvr_core::rng::seeded_rng(seed));
        let cand = GroundTruth::VertexSet { nodes: shuffled };
        let opts = MatchOptions::default();
        prop_assert!(values_match(&cand, &truth, opts));
        prop_assert_eq!(values_match(&cand, &truth, opts), values_match(&truth, &cand, opts));
    }

    #[test]
    fn integer_answers_roundtrip_through_json(value in any::<i64>()) {
        let truth = GroundTruth::Int { value };
        let back: i64 = serde_json::from_value(answer_json(&truth)["answer"].clone())
            .or_else(|_| serde_json::from_value(answer_json(&truth)))
            .unwrap();
        prop_assert_eq!(back, value);
    }
}

#[test]
fn dataset_jsonl_roundtrip() {
    let mut buf = Vec::new();
    write_dataset_to(fixtures(), &mut buf).unwrap();
    let back = read_dataset_from(buf.as_slice(), Validation::Full).unwrap();
    assert_eq!(back.as_slice(), fixtures());
    let mut again = Vec::new();
    write_dataset_to(&back, &mut again).unwrap();
    assert_eq!(again, buf);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_solver_matches_brute_force(seed in any::<u64>(), op in 0usize..GraphOperator::ALL.len(), directed in any::<bool>()) {
        let config = GraphConfig {
            count: 1,
            seed,
            node_bounds: (5, if directed { 7 } else { 9 }),
            operator_whitelist: vec![GraphOperator::ALL[op]],
            weighted_fraction: 0.5,
            directed_fraction: if directed { 1.0 } else { 0.0 },
            ..GraphConfig::default()
        };
        let Ok(insts) = generate_graphs(&config) else { return Ok(()) };
        let inst = &insts[0];
        let ProblemSpec::Graph(p) = &inst.spec else { unreachable!() };
        let solved = rlvr_core::graph::solve_exact(p, &rlvr_core::graph::Budget::unlimited()).unwrap();
        if let Some(best) = common::brute_graph(p) {
            prop_assert!(solved.value.exact_cmp(best).is_eq(), "{}: {:?} vs {:?}", inst.id, solved.value, best);
        }
        prop_assert_eq!(inst.family, TaskFamily::Graph);
    }
}
