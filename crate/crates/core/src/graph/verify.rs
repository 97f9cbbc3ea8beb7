//! Candidate verification: any answer that satisfies the operator's predicate
//! and attains the optimum is correct, not just the stored witness.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::bits::{bit, members, Adjacency};
use super::solve::{round_ratio, GraphSolution, Objective};
use super::{GraphOperator, GraphProblem};
use crate::parsing::{ExtractionStatus, ParsedAnswer};
use crate::types::{scaled_round, GroundTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Incorrect,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub verdict: Verdict,
    pub detail: String,
}

impl Verification {
    fn new(verdict: Verdict, detail: impl Into<String>) -> Self {
        Verification { verdict, detail: detail.into() }
    }
}

/// Outcome of checking a candidate witness against the operator's predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CandidateEval {
    /// Structurally malformed (wrong shape, unknown ids, duplicates, missing edges).
    Invalid(String),
    /// Well formed but violates the operator's predicate.
    Infeasible(String),
    /// Satisfies the predicate with this objective value.
    Feasible(Objective),
}

fn minimises(op: GraphOperator) -> bool {
    use GraphOperator::*;
    matches!(op, MinimumDensitySubgraph | MinimumVertexCover | BalancedCut | FeedbackVertexSet | FeedbackEdgeSet)
}

fn is_scalar(op: GraphOperator) -> bool {
    matches!(op, GraphOperator::GraphDiameter | GraphOperator::GraphRadius | GraphOperator::GraphDensity)
}

/// Checks the shape, ids and predicate of `candidate` and computes its objective.
/// Scalar operators (diameter, radius, density) have no witness and always evaluate `Invalid`.
pub fn evaluate_candidate(problem: &GraphProblem, candidate: &GroundTruth) -> CandidateEval {
    use GraphOperator::*;
    let g = Adjacency::new(problem);
    match (problem.operator, candidate) {
        (
            MinimumDensitySubgraph | MaximumClique | MaximumIndependentSet | MinimumVertexCover
            | MaximumInducedBipartiteSubgraph | DensestKSubgraph | FeedbackVertexSet,
            GroundTruth::VertexSet { nodes },
        ) => match node_mask(nodes, g.n) {
            Ok(mask) => vertex_set(problem, &g, mask),
            Err(e) => CandidateEval::Invalid(e),
        },
        (MaximumAcyclicSubgraph | FeedbackEdgeSet, GroundTruth::EdgeSet { edges }) => edge_set(problem, &g, edges),
        (BalancedCut, GroundTruth::Partition { parts: (a, b) }) => partition(&g, a, b),
        (LongestPath | HamiltonianPath | HamiltonianCycle, GroundTruth::NodeSequence { nodes }) => {
            sequence(problem.operator, &g, nodes)
        }
        (op, c) if is_scalar(op) => CandidateEval::Invalid(format!("`{op}` takes a number, not a {}", c.shape_name())),
        (op, c) => CandidateEval::Invalid(format!("`{op}` does not take a {} answer", c.shape_name())),
    }
}

fn node_mask(nodes: &[usize], n: usize) -> Result<u32, String> {
    let mut mask = 0u32;
    for &v in nodes {
        if v >= n {
            return Err(format!("node {v} is out of range 0..{n}"));
        }
        if mask & bit(v) != 0 {
            return Err(format!("node {v} is listed twice"));
        }
        mask |= bit(v);
    }
    Ok(mask)
}

fn pairs(g: &Adjacency, size: i64) -> i64 {
    if g.directed {
        size * (size - 1)
    } else {
        size * (size - 1) / 2
    }
}

fn vertex_set(problem: &GraphProblem, g: &Adjacency, mask: u32) -> CandidateEval {
    use GraphOperator::*;
    let size = mask.count_ones() as i64;
    let infeasible = |s: String| CandidateEval::Infeasible(s);
    match problem.operator {
        MaximumClique => {
            if let Some(v) = members(mask).find(|&v| mask & !bit(v) & !g.und[v] != 0) {
                return infeasible(format!("node {v} is not adjacent to every other member"));
            }
        }
        MaximumIndependentSet => {
            if let Some(v) = members(mask).find(|&v| g.und[v] & mask != 0) {
                let u = (g.und[v] & mask).trailing_zeros();
                return infeasible(format!("edge ({v}, {u}) lies inside the set"));
            }
        }
        MinimumVertexCover => {
            let outside = g.all() & !mask;
            if let Some(v) = members(outside).find(|&v| g.und[v] & outside != 0) {
                let u = (g.und[v] & outside).trailing_zeros();
                return infeasible(format!("edge ({v}, {u}) is not covered"));
            }
        }
        MaximumInducedBipartiteSubgraph => {
            if !two_colourable(g, mask) {
                return infeasible("induced subgraph contains an odd cycle".into());
            }
        }
        FeedbackVertexSet => {
            if !g.induced_acyclic(g.all() & !mask) {
                return infeasible("removing the set leaves a cycle".into());
            }
        }
        MinimumDensitySubgraph => {
            if size < 2 {
                return infeasible("subgraph needs at least 2 nodes".into());
            }
            if !g.connected_within(mask) {
                return infeasible("subgraph is not connected".into());
            }
            return CandidateEval::Feasible(Objective::Ratio { num: g.inner_weight(mask), den: pairs(g, size) });
        }
        DensestKSubgraph => {
            let k = problem.k.unwrap_or(0) as i64;
            if size != k {
                return infeasible(format!("subgraph has {size} nodes, expected exactly {k}"));
            }
            return CandidateEval::Feasible(Objective::Ratio { num: g.inner_weight(mask), den: pairs(g, size) });
        }
        _ => unreachable!("vertex-set operators only"),
    }
    CandidateEval::Feasible(Objective::int(size))
}

fn two_colourable(g: &Adjacency, set: u32) -> bool {
    let mut colour = [0u8; 32];
    let mut left = set;
    while left != 0 {
        let start = left.trailing_zeros() as usize;
        colour[start] = 1;
        let mut stack = vec![start];
        left &= !bit(start);
        while let Some(v) = stack.pop() {
            for u in members(g.und[v] & set) {
                if colour[u] == 0 {
                    colour[u] = 3 - colour[v];
                    left &= !bit(u);
                    stack.push(u);
                } else if colour[u] == colour[v] {
                    return false;
                }
            }
        }
    }
    true
}

/// True when the arcs form no (directed) cycle.
fn arcs_acyclic(n: usize, arcs: &[(usize, usize)], directed: bool) -> bool {
    if directed {
        let mut indeg = vec![0usize; n];
        let mut out = vec![Vec::new(); n];
        for &(u, v) in arcs {
            indeg[v] += 1;
            out[u].push(v);
        }
        let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop() {
            seen += 1;
            for &u in &out[v] {
                indeg[u] -= 1;
                if indeg[u] == 0 {
                    queue.push(u);
                }
            }
        }
        seen == n
    } else {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(u, v) in arcs {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        true
    }
}

fn edge_set(problem: &GraphProblem, g: &Adjacency, edges: &[(usize, usize)]) -> CandidateEval {
    let key = |(u, v): (usize, usize)| if g.directed { (u, v) } else { (u.min(v), u.max(v)) };
    let mut chosen = std::collections::HashSet::new();
    for &(u, v) in edges {
        if u >= g.n || v >= g.n {
            return CandidateEval::Invalid(format!("edge ({u}, {v}) references a missing node"));
        }
        if !g.has_arc(u, v) {
            return CandidateEval::Invalid(format!("edge ({u}, {v}) is not in the graph"));
        }
        if !chosen.insert(key((u, v))) {
            return CandidateEval::Invalid(format!("edge ({u}, {v}) is listed twice"));
        }
    }
    let all: Vec<(usize, usize)> = problem.edges.iter().map(|e| key((e.u, e.v))).collect();
    let remaining: Vec<(usize, usize)> = if problem.operator == GraphOperator::MaximumAcyclicSubgraph {
        all.into_iter().filter(|e| chosen.contains(e)).collect()
    } else {
        all.into_iter().filter(|e| !chosen.contains(e)).collect()
    };
    if !arcs_acyclic(g.n, &remaining, g.directed) {
        return CandidateEval::Infeasible(if problem.operator == GraphOperator::MaximumAcyclicSubgraph {
            "the chosen edges contain a cycle".into()
        } else {
            "removing the edges leaves a cycle".into()
        });
    }
    CandidateEval::Feasible(Objective::int(edges.len() as i64))
}

fn partition(g: &Adjacency, a: &[usize], b: &[usize]) -> CandidateEval {
    let (ma, mb) = match (node_mask(a, g.n), node_mask(b, g.n)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return CandidateEval::Invalid(e),
    };
    if ma & mb != 0 {
        return CandidateEval::Invalid(format!("node {} is in both parts", (ma & mb).trailing_zeros()));
    }
    if ma | mb != g.all() {
        return CandidateEval::Invalid(format!("node {} is in neither part", (g.all() & !(ma | mb)).trailing_zeros()));
    }
    if (a.len() as i64 - b.len() as i64).abs() > 1 {
        return CandidateEval::Infeasible(format!("parts of size {} and {} are not balanced", a.len(), b.len()));
    }
    let cut: i64 = members(ma).map(|v| (g.und[v] & mb).count_ones() as i64).sum();
    CandidateEval::Feasible(Objective::int(cut))
}

fn sequence(op: GraphOperator, g: &Adjacency, nodes: &[usize]) -> CandidateEval {
    let mut nodes = nodes;
    // A cycle may be written with its start repeated at the end.
    if op == GraphOperator::HamiltonianCycle && nodes.len() == g.n + 1 && nodes.first() == nodes.last() {
        nodes = &nodes[..g.n];
    }
    if nodes.is_empty() {
        return match op {
            GraphOperator::LongestPath => CandidateEval::Invalid("path is empty".into()),
            // "No Hamiltonian path/cycle" answer.
            _ => CandidateEval::Feasible(Objective::int(0)),
        };
    }
    if let Err(e) = node_mask(nodes, g.n) {
        return CandidateEval::Invalid(e);
    }
    let mut weight = 0i64;
    for w in nodes.windows(2) {
        if !g.has_arc(w[0], w[1]) {
            return CandidateEval::Infeasible(format!("({}, {}) is not an edge", w[0], w[1]));
        }
        weight += g.weight(w[0], w[1]) as i64;
    }
    match op {
        GraphOperator::LongestPath => CandidateEval::Feasible(Objective::int(weight)),
        _ => {
            if nodes.len() != g.n {
                return CandidateEval::Infeasible(format!("visits {} of {} nodes", nodes.len(), g.n));
            }
            if op == GraphOperator::HamiltonianCycle && !g.has_arc(nodes[g.n - 1], nodes[0]) {
                return CandidateEval::Infeasible(format!("({}, {}) does not close the cycle", nodes[g.n - 1], nodes[0]));
            }
            CandidateEval::Feasible(Objective::int(g.n as i64))
        }
    }
}

/// Rebuilds the [`GraphSolution`] a stored witness represents without re-solving.
pub fn solution_from_witness(problem: &GraphProblem, witness: &GroundTruth) -> Result<GraphSolution, String> {
    let op = problem.operator;
    let value = match (op, witness) {
        (GraphOperator::GraphDiameter | GraphOperator::GraphRadius, GroundTruth::Int { value }) => Objective::int(*value),
        (GraphOperator::GraphDensity, GroundTruth::Real { .. }) => {
            Objective::Ratio { num: problem.edges.len() as i64, den: problem.max_edges() as i64 }
        }
        _ => match evaluate_candidate(problem, witness) {
            CandidateEval::Feasible(v) => v,
            CandidateEval::Invalid(e) | CandidateEval::Infeasible(e) => return Err(e),
        },
    };
    let exists = !matches!(
        (op, witness),
        (GraphOperator::HamiltonianPath | GraphOperator::HamiltonianCycle, GroundTruth::NodeSequence { nodes })
            if nodes.is_empty()
    );
    Ok(GraphSolution { value, witness: witness.clone(), exists })
}

/// Verifies a parsed answer. Anything not extracted is `invalid`.
pub fn verify_answer(problem: &GraphProblem, truth: &GraphSolution, candidate: &ParsedAnswer) -> Verification {
    match (&candidate.status, &candidate.value) {
        (ExtractionStatus::Extracted, Some(value)) => verify_value(problem, truth, value),
        (status, _) => Verification::new(Verdict::Invalid, format!("no answer extracted ({status:?})")),
    }
}

/// Verifies a candidate value against the exact solution.
pub fn verify_value(problem: &GraphProblem, truth: &GraphSolution, candidate: &GroundTruth) -> Verification {
    let op = problem.operator;
    if is_scalar(op) {
        let Some(got) = candidate.as_f64() else {
            return Verification::new(Verdict::Invalid, format!("expected a number, got a {}", candidate.shape_name()));
        };
        let expected = truth.value.as_f64();
        let ok = match truth.value {
            Objective::Int { value } => got == value as f64,
            Objective::Ratio { num, den } => scaled_round(got, 3) == scaled_round(round_ratio(num, den, 3), 3),
        };
        return if ok {
            Verification::new(Verdict::Correct, "value matches")
        } else {
            Verification::new(Verdict::Incorrect, format!("expected {expected}, got {got}"))
        };
    }
    if matches!(op, GraphOperator::HamiltonianPath | GraphOperator::HamiltonianCycle) {
        let empty = matches!(candidate, GroundTruth::NodeSequence { nodes } if nodes.is_empty());
        if !truth.exists {
            return if empty {
                Verification::new(Verdict::Correct, "correctly reports that none exists")
            } else if matches!(candidate, GroundTruth::NodeSequence { .. }) {
                match evaluate_candidate(problem, candidate) {
                    CandidateEval::Invalid(e) => Verification::new(Verdict::Invalid, e),
                    _ => Verification::new(Verdict::Incorrect, "no Hamiltonian path or cycle exists"),
                }
            } else {
                Verification::new(Verdict::Invalid, format!("expected a node sequence, got a {}", candidate.shape_name()))
            };
        }
        if empty {
            return Verification::new(Verdict::Incorrect, "claims none exists but one does");
        }
    }
    match evaluate_candidate(problem, candidate) {
        CandidateEval::Invalid(e) => Verification::new(Verdict::Invalid, e),
        CandidateEval::Infeasible(e) => Verification::new(Verdict::Incorrect, e),
        CandidateEval::Feasible(value) => {
            let cmp = value.exact_cmp(truth.value);
            let better = if minimises(op) { cmp == Ordering::Less } else { cmp == Ordering::Greater };
            if cmp == Ordering::Equal {
                Verification::new(Verdict::Correct, "optimal")
            } else if better {
                // Only possible if `truth` is not the true optimum.
                Verification::new(Verdict::Incorrect, "candidate beats the recorded optimum; truth is stale")
            } else {
                Verification::new(
                    Verdict::Incorrect,
                    format!("suboptimal: objective {} vs optimum {}", value.as_f64(), truth.value.as_f64()),
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{solve_exact, Budget, Edge};

    fn mis_problem() -> GraphProblem {
        GraphProblem {
            n_nodes: 5,
            edges: vec![Edge { u: 0, v: 2, w: 1 }, Edge { u: 0, v: 4, w: 1 }],
            directed: false,
            weighted: false,
            operator: GraphOperator::MaximumIndependentSet,
            k: None,
        }
    }

    fn check(p: &GraphProblem, nodes: &[usize]) -> Verdict {
        let truth = solve_exact(p, &Budget::unlimited()).unwrap();
        verify_value(p, &truth, &GroundTruth::VertexSet { nodes: nodes.to_vec() }).verdict
    }

    #[test]
    fn worked_mis_candidates() {
        let p = mis_problem();
        assert_eq!(check(&p, &[1, 2, 3, 4]), Verdict::Correct);
        assert_eq!(check(&p, &[4, 3, 2, 1]), Verdict::Correct);
        assert_eq!(check(&p, &[2, 3, 4]), Verdict::Incorrect);
        assert_eq!(check(&p, &[0, 2]), Verdict::Incorrect);
        assert_eq!(check(&p, &[1, 2, 3, 9]), Verdict::Invalid);
        assert_eq!(check(&p, &[1, 1, 2, 3]), Verdict::Invalid);
    }

    #[test]
    fn co_optimal_cover_accepted() {
        // Two disjoint edges: any choice of one endpoint each is optimal.
        let mut p = mis_problem();
        p.operator = GraphOperator::MinimumVertexCover;
        p.edges = vec![Edge { u: 0, v: 1, w: 1 }, Edge { u: 2, v: 3, w: 1 }];
        assert_eq!(check(&p, &[0, 2]), Verdict::Correct);
        assert_eq!(check(&p, &[1, 3]), Verdict::Correct);
        assert_eq!(check(&p, &[0, 1]), Verdict::Incorrect);
    }

    #[test]
    fn hamiltonian_cycle_forms() {
        let edges: Vec<Edge> = (0..5).map(|i| Edge { u: i, v: (i + 1) % 5, w: 1 }).collect();
        let p = GraphProblem { edges, operator: GraphOperator::HamiltonianCycle, ..mis_problem() };
        let truth = solve_exact(&p, &Budget::unlimited()).unwrap();
        let seq = |v: &[usize]| verify_value(&p, &truth, &GroundTruth::NodeSequence { nodes: v.to_vec() }).verdict;
        assert_eq!(seq(&[0, 1, 2, 3, 4]), Verdict::Correct);
        assert_eq!(seq(&[2, 1, 0, 4, 3]), Verdict::Correct);
        assert_eq!(seq(&[0, 1, 2, 3, 4, 0]), Verdict::Correct);
        assert_eq!(seq(&[0, 2, 1, 3, 4]), Verdict::Incorrect);
        assert_eq!(seq(&[]), Verdict::Incorrect);
    }

    #[test]
    fn density_matches_to_three_decimals() {
        let p = GraphProblem { operator: GraphOperator::GraphDensity, ..mis_problem() };
        let truth = solve_exact(&p, &Budget::unlimited()).unwrap();
        let real = |x: f64| verify_value(&p, &truth, &GroundTruth::Real { value: x, decimals: 3 }).verdict;
        assert_eq!(real(0.2), Verdict::Correct);
        assert_eq!(real(0.2004), Verdict::Correct);
        assert_eq!(real(0.21), Verdict::Incorrect);
    }

    #[test]
    fn witness_round_trip() {
        for op in [GraphOperator::MaximumIndependentSet, GraphOperator::BalancedCut, GraphOperator::FeedbackEdgeSet] {
            let p = GraphProblem { operator: op, ..mis_problem() };
            let truth = solve_exact(&p, &Budget::unlimited()).unwrap();
            assert_eq!(solution_from_witness(&p, &truth.witness).unwrap(), truth);
        }
    }
}
