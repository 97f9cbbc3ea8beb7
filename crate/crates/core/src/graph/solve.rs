//! Exact solvers for every graph operator.
//!
//! Set-valued answers are made unique by returning the lexicographically
//! smallest optimal witness. For the branch-and-bound problems this is done
//! by a forced-decision sweep: vertex by vertex, try to force the vertex into
//! the solution and keep it there iff the optimum is still reachable.

use std::cell::Cell;
use std::cmp::Ordering;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bits::{bit, lex_cmp, members, next_combination, to_vec, Adjacency};
use super::{GraphError, GraphOperator, GraphProblem};
use crate::types::GroundTruth;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("solver budget exceeded")]
    BudgetExceeded,
    #[error("graph is not {0}connected; distance metrics are undefined")]
    Disconnected(&'static str),
    #[error(transparent)]
    Invalid(#[from] GraphError),
}

/// Cooperative work and wall-clock limit for one solve.
///
/// Steps are counted deterministically (search nodes, DP rows), so a step
/// limit rejects the same instances on every machine; the deadline is a
/// safety net only.
#[derive(Debug)]
pub struct Budget {
    max_steps: u64,
    steps: Cell<u64>,
    deadline: Option<Instant>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget { max_steps: u64::MAX, steps: Cell::new(0), deadline: None }
    }

    pub fn new(max_steps: u64, time_limit: Option<Duration>) -> Self {
        Budget { max_steps, steps: Cell::new(0), deadline: time_limit.map(|d| Instant::now() + d) }
    }

    pub fn steps_used(&self) -> u64 {
        self.steps.get()
    }

    pub(crate) fn tick(&self, amount: u64) -> Result<(), SolveError> {
        let before = self.steps.get();
        let after = before.saturating_add(amount);
        self.steps.set(after);
        if after > self.max_steps {
            return Err(SolveError::BudgetExceeded);
        }
        // Check the clock roughly every 64k steps.
        if before >> 16 != after >> 16 {
            if let Some(deadline) = self.deadline {
                if Instant::now() > deadline {
                    return Err(SolveError::BudgetExceeded);
                }
            }
        }
        Ok(())
    }
}

/// Optimal objective value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Objective {
    Int { value: i64 },
    /// Exact rational `num / den`, `den > 0`.
    Ratio { num: i64, den: i64 },
}

impl Objective {
    pub fn int(value: i64) -> Self {
        Objective::Int { value }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Objective::Int { value } => value as f64,
            Objective::Ratio { num, den } => num as f64 / den as f64,
        }
    }

    /// Exact comparison (cross-multiplied for ratios).
    pub fn exact_cmp(self, other: Objective) -> Ordering {
        let (a, b) = match (self, other) {
            (Objective::Int { value: x }, Objective::Int { value: y }) => return x.cmp(&y),
            (Objective::Int { value }, Objective::Ratio { num, den }) => (value as i128 * den as i128, num as i128),
            (Objective::Ratio { num, den }, Objective::Int { value }) => (num as i128, value as i128 * den as i128),
            (Objective::Ratio { num: n1, den: d1 }, Objective::Ratio { num: n2, den: d2 }) => {
                (n1 as i128 * d2 as i128, n2 as i128 * d1 as i128)
            }
        };
        a.cmp(&b)
    }
}

/// Result of an exact solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSolution {
    pub value: Objective,
    pub witness: GroundTruth,
    /// False only for Hamiltonian problems without a solution.
    pub exists: bool,
}

/// Solves `problem` exactly.
pub fn solve_exact(problem: &GraphProblem, budget: &Budget) -> Result<GraphSolution, SolveError> {
    problem.validate()?;
    let g = Adjacency::new(problem);
    use GraphOperator::*;
    let set = |mask: u32, value: i64| GraphSolution {
        value: Objective::int(value),
        witness: GroundTruth::VertexSet { nodes: to_vec(mask) },
        exists: true,
    };
    Ok(match problem.operator {
        MaximumClique => {
            let mask = lex_max_clique(&g.und, g.all(), budget)?;
            set(mask, mask.count_ones() as i64)
        }
        MaximumIndependentSet => {
            let mask = lex_max_clique(&g.complement(), g.all(), budget)?;
            set(mask, mask.count_ones() as i64)
        }
        MinimumVertexCover => {
            let mask = lex_min_vertex_cover(&g, budget)?;
            set(mask, mask.count_ones() as i64)
        }
        MaximumInducedBipartiteSubgraph => {
            let mask = lex_optimal(g.n, budget, |fin, fout, target, b| bipartite_search(&g, fin, fout, target, b))?;
            set(mask, mask.count_ones() as i64)
        }
        FeedbackVertexSet => {
            let mask = lex_min_feedback_vertex_set(&g, budget)?;
            set(mask, mask.count_ones() as i64)
        }
        MaximumAcyclicSubgraph | FeedbackEdgeSet => acyclic_edges(&g, problem, budget)?,
        MinimumDensitySubgraph => min_density_subgraph(&g, budget)?,
        DensestKSubgraph => densest_k(&g, problem.k.expect("validated"), budget)?,
        BalancedCut => balanced_cut(&g, budget)?,
        LongestPath => longest_path(&g, budget)?,
        HamiltonianPath => hamiltonian(&g, false, budget)?,
        HamiltonianCycle => hamiltonian(&g, true, budget)?,
        GraphDiameter | GraphRadius => {
            let dist = all_pairs(&g)?;
            let ecc: Vec<i64> = (0..g.n).map(|u| (0..g.n).map(|v| dist[u * g.n + v]).max().unwrap_or(0)).collect();
            let value = if problem.operator == GraphDiameter {
                *ecc.iter().max().expect("n >= 5")
            } else {
                *ecc.iter().min().expect("n >= 5")
            };
            GraphSolution { value: Objective::int(value), witness: GroundTruth::Int { value }, exists: true }
        }
        GraphDensity => {
            let num = problem.edges.len() as i64;
            let den = problem.max_edges() as i64;
            GraphSolution {
                value: Objective::Ratio { num, den },
                witness: GroundTruth::Real { value: round_ratio(num, den, 3), decimals: 3 },
                exists: true,
            }
        }
    })
}

/// `num / den` rounded half away from zero to `decimals` places.
pub(crate) fn round_ratio(num: i64, den: i64, decimals: u32) -> f64 {
    let scale = 10i128.pow(decimals);
    let n = num as i128 * scale;
    let d = den as i128;
    let q = (2 * n.abs() + d) / (2 * d);
    let q = if n < 0 { -q } else { q };
    q as f64 / scale as f64
}

// ---------------------------------------------------------------------------
// Forced-decision sweep

/// Finds the lexicographically smallest optimal set for a maximisation
/// problem given `search(forced_in, forced_out, target, budget)`, which must
/// return the best reachable size, stopping early once `target` is reached.
fn lex_optimal<F>(n: usize, budget: &Budget, mut search: F) -> Result<u32, SolveError>
where
    F: FnMut(u32, u32, i64, &Budget) -> Result<i64, SolveError>,
{
    let optimum = search(0, 0, i64::MAX, budget)?;
    let (mut fin, mut fout) = (0u32, 0u32);
    for v in 0..n {
        if fin.count_ones() as i64 == optimum {
            fout |= bit(v);
            continue;
        }
        if search(fin | bit(v), fout, optimum, budget)? >= optimum {
            fin |= bit(v);
        } else {
            fout |= bit(v);
        }
    }
    Ok(fin)
}

// ---------------------------------------------------------------------------
// Maximum clique (and independent set on the complement)

struct CliqueSearch<'a> {
    adj: &'a [u32],
    best: i64,
    target: i64,
    budget: &'a Budget,
}

impl CliqueSearch<'_> {
    /// Returns true once `target` is reached.
    fn expand(&mut self, size: i64, mut cand: u32) -> Result<bool, SolveError> {
        self.budget.tick(1)?;
        // Greedy colouring: colour classes give an upper bound per vertex.
        let mut order = [(0u8, 0u8); 32];
        let mut len = 0;
        let mut uncoloured = cand;
        let mut colour = 0u8;
        while uncoloured != 0 {
            colour += 1;
            let mut q = uncoloured;
            while q != 0 {
                let v = q.trailing_zeros() as usize;
                q &= !bit(v) & !self.adj[v];
                uncoloured &= !bit(v);
                order[len] = (v as u8, colour);
                len += 1;
            }
        }
        for &(v, c) in order[..len].iter().rev() {
            if size + c as i64 <= self.best {
                return Ok(false);
            }
            let v = v as usize;
            let next = cand & self.adj[v];
            if size + 1 > self.best {
                self.best = size + 1;
                if self.best >= self.target {
                    return Ok(true);
                }
            }
            if next != 0 && self.expand(size + 1, next)? {
                return Ok(true);
            }
            cand &= !bit(v);
        }
        Ok(false)
    }
}

/// Largest clique size inside `cand`, stopping once `target` is reached.
pub(crate) fn max_clique_size(adj: &[u32], cand: u32, target: i64, budget: &Budget) -> Result<i64, SolveError> {
    if cand == 0 {
        return Ok(0);
    }
    let mut s = CliqueSearch { adj, best: 0, target, budget };
    s.expand(0, cand)?;
    Ok(s.best)
}

fn clique_with(adj: &[u32], all: u32, fin: u32, fout: u32, target: i64, budget: &Budget) -> Result<i64, SolveError> {
    let mut cand = all & !fin & !fout;
    for u in members(fin) {
        if fin & !bit(u) & !adj[u] != 0 {
            return Ok(-1);
        }
        cand &= adj[u];
    }
    let base = fin.count_ones() as i64;
    Ok(base + max_clique_size(adj, cand, target - base, budget)?)
}

fn lex_max_clique(adj: &[u32], all: u32, budget: &Budget) -> Result<u32, SolveError> {
    let n = 32 - all.leading_zeros() as usize;
    lex_optimal(n, budget, |fin, fout, target, b| clique_with(adj, all, fin, fout, target, b))
}

/// Minimum vertex cover = complement of a maximum independent set. A cover
/// containing `fin` and avoiding `fout` is an independent set containing
/// `fout` and avoiding `fin`.
fn lex_min_vertex_cover(g: &Adjacency, budget: &Budget) -> Result<u32, SolveError> {
    let comp = g.complement();
    let all = g.all();
    let mis = max_clique_size(&comp, all, i64::MAX, budget)?;
    let cover_size = g.n as i64 - mis;
    let (mut fin, mut fout) = (0u32, 0u32);
    for v in 0..g.n {
        if fin.count_ones() as i64 == cover_size {
            fout |= bit(v);
            continue;
        }
        let trial = fin | bit(v);
        if clique_with(&comp, all, fout, trial, mis, budget)? >= mis {
            fin = trial;
        } else {
            fout |= bit(v);
        }
    }
    Ok(fin)
}

// ---------------------------------------------------------------------------
// Maximum induced bipartite subgraph

struct BipartiteSearch<'a> {
    g: &'a Adjacency,
    fin: u32,
    fout: u32,
    best: i64,
    target: i64,
    budget: &'a Budget,
}

impl BipartiteSearch<'_> {
    fn go(&mut self, v: usize, a: u32, b: u32, kept: i64) -> Result<bool, SolveError> {
        self.budget.tick(1)?;
        let adj = &self.g.und;
        if v == self.g.n {
            if kept > self.best {
                self.best = kept;
            }
            return Ok(self.best >= self.target);
        }
        let mut bound = kept;
        for u in v..self.g.n {
            if self.fout & bit(u) != 0 {
                continue;
            }
            if adj[u] & a == 0 || adj[u] & b == 0 {
                bound += 1;
            } else if self.fin & bit(u) != 0 {
                return Ok(false);
            }
        }
        if bound <= self.best {
            return Ok(false);
        }
        let vb = bit(v);
        if self.fout & vb != 0 {
            return self.go(v + 1, a, b, kept);
        }
        if adj[v] & a == 0 && self.go(v + 1, a | vb, b, kept + 1)? {
            return Ok(true);
        }
        // Sides are interchangeable until the first vertex is placed.
        if (a | b) != 0 && adj[v] & b == 0 && self.go(v + 1, a, b | vb, kept + 1)? {
            return Ok(true);
        }
        if self.fin & vb == 0 && self.go(v + 1, a, b, kept)? {
            return Ok(true);
        }
        Ok(false)
    }
}

fn bipartite_search(g: &Adjacency, fin: u32, fout: u32, target: i64, budget: &Budget) -> Result<i64, SolveError> {
    let floor = if target == i64::MAX { -1 } else { target - 1 };
    let mut s = BipartiteSearch { g, fin, fout, best: floor, target, budget };
    s.go(0, 0, 0, 0)?;
    Ok(s.best)
}

// ---------------------------------------------------------------------------
// Feedback vertex set via maximum induced forest / DAG

#[derive(Clone, Copy)]
struct ForestState {
    kept: u32,
    /// Undirected: component masks (unused slots are 0). Directed: reach sets.
    sets: [u32; 25],
}

struct ForestSearch<'a> {
    g: &'a Adjacency,
    fin: u32,
    fout: u32,
    best: i64,
    target: i64,
    budget: &'a Budget,
}

impl ForestSearch<'_> {
    fn can_add(&self, st: &ForestState, v: usize) -> bool {
        if self.g.directed {
            let out = self.g.out[v] & st.kept;
            let inn = self.g.inn[v] & st.kept;
            let mut reach = out;
            for u in members(out) {
                reach |= st.sets[u];
            }
            reach & inn == 0
        } else {
            let nb = self.g.und[v] & st.kept;
            st.sets.iter().all(|&c| (c & nb).count_ones() <= 1)
        }
    }

    fn add(&self, st: &ForestState, v: usize) -> ForestState {
        let mut next = *st;
        next.kept |= bit(v);
        if self.g.directed {
            let out = self.g.out[v] & st.kept;
            let inn = self.g.inn[v] & st.kept;
            let mut reach = out;
            for u in members(out) {
                reach |= st.sets[u];
            }
            next.sets[v] = reach;
            for w in members(st.kept) {
                if inn & bit(w) != 0 || st.sets[w] & inn != 0 {
                    next.sets[w] |= bit(v) | reach;
                }
            }
        } else {
            let nb = self.g.und[v] & st.kept;
            let mut merged = bit(v);
            for c in next.sets.iter_mut() {
                if *c & nb != 0 {
                    merged |= *c;
                    *c = 0;
                }
            }
            let slot = next.sets.iter().position(|&c| c == 0).expect("at most 25 components");
            next.sets[slot] = merged;
        }
        next
    }

    fn go(&mut self, v: usize, st: ForestState) -> Result<bool, SolveError> {
        self.budget.tick(1)?;
        let kept = st.kept.count_ones() as i64;
        if v == self.g.n {
            if kept > self.best {
                self.best = kept;
            }
            return Ok(self.best >= self.target);
        }
        let mut bound = kept;
        for u in v..self.g.n {
            if self.fout & bit(u) != 0 {
                continue;
            }
            if self.can_add(&st, u) {
                bound += 1;
            } else if self.fin & bit(u) != 0 {
                return Ok(false);
            }
        }
        if bound <= self.best {
            return Ok(false);
        }
        let vb = bit(v);
        if self.fout & vb == 0 && self.can_add(&st, v) {
            let next = self.add(&st, v);
            if self.go(v + 1, next)? {
                return Ok(true);
            }
        }
        if self.fin & vb == 0 && self.go(v + 1, st)? {
            return Ok(true);
        }
        Ok(false)
    }
}

/// Largest acyclic induced subgraph containing `fin` and avoiding `fout`.
fn forest_search(g: &Adjacency, fin: u32, fout: u32, target: i64, budget: &Budget) -> Result<i64, SolveError> {
    let floor = if target == i64::MAX { -1 } else { target - 1 };
    let mut s = ForestSearch { g, fin, fout, best: floor, target, budget };
    s.go(0, ForestState { kept: 0, sets: [0; 25] })?;
    Ok(s.best)
}

fn lex_min_feedback_vertex_set(g: &Adjacency, budget: &Budget) -> Result<u32, SolveError> {
    let forest = forest_search(g, 0, 0, i64::MAX, budget)?;
    let fvs_size = g.n as i64 - forest;
    let (mut fin, mut fout) = (0u32, 0u32);
    for v in 0..g.n {
        if fin.count_ones() as i64 == fvs_size {
            fout |= bit(v);
            continue;
        }
        // Deleted vertices are excluded from the forest, kept ones forced into it.
        let trial = fin | bit(v);
        if forest_search(g, fout, trial, forest, budget)? >= forest {
            fin = trial;
        } else {
            fout |= bit(v);
        }
    }
    Ok(fin)
}

// ---------------------------------------------------------------------------
// Maximum acyclic edge subset / feedback edge set

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

fn forest_rank(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> usize {
    let mut uf = UnionFind::new(n);
    edges.filter(|&(u, v)| uf.union(u, v)).count()
}

fn acyclic_edges(g: &Adjacency, problem: &GraphProblem, budget: &Budget) -> Result<GraphSolution, SolveError> {
    let mut edges: Vec<(usize, usize)> = problem
        .edges
        .iter()
        .map(|e| if problem.directed { (e.u, e.v) } else { (e.u.min(e.v), e.u.max(e.v)) })
        .collect();
    edges.sort_unstable();
    let m = edges.len();
    let (kept, removed) = if problem.directed {
        max_acyclic_ordering(g, &edges, budget)?
    } else {
        let rank = forest_rank(g.n, edges.iter().copied());
        // Kruskal in ascending order yields the lexicographically smallest forest.
        let mut uf = UnionFind::new(g.n);
        let kept: Vec<_> = edges.iter().copied().filter(|&(u, v)| uf.union(u, v)).collect();
        // Smallest removal set: greedily remove edges while the rest still spans.
        let mut removed_flags = vec![false; m];
        let mut removed_count = 0;
        for i in 0..m {
            if removed_count == m - rank {
                break;
            }
            budget.tick(m as u64)?;
            removed_flags[i] = true;
            let r = forest_rank(g.n, edges.iter().enumerate().filter(|(j, _)| !removed_flags[*j]).map(|(_, &e)| e));
            if r == rank {
                removed_count += 1;
            } else {
                removed_flags[i] = false;
            }
        }
        let removed = edges.iter().zip(&removed_flags).filter(|(_, &f)| f).map(|(&e, _)| e).collect();
        (kept, removed)
    };
    let (value, edges) = if problem.operator == GraphOperator::MaximumAcyclicSubgraph {
        (kept.len(), kept)
    } else {
        (removed.len(), removed)
    };
    Ok(GraphSolution { value: Objective::int(value as i64), witness: GroundTruth::EdgeSet { edges }, exists: true })
}

/// Subset DP over vertex orderings: the best ordering keeps every forward arc.
fn max_acyclic_ordering(
    g: &Adjacency,
    edges: &[(usize, usize)],
    budget: &Budget,
) -> Result<(Vec<(usize, usize)>, Vec<(usize, usize)>), SolveError> {
    let n = g.n;
    let size = 1usize << n;
    let mut dp = vec![0u16; size];
    for s in 1..size {
        if s & 0xfff == 0 {
            budget.tick(0x1000)?;
        }
        let set = s as u32;
        let mut best = 0u16;
        for v in members(set) {
            let rest = set & !bit(v);
            let val = dp[rest as usize] + (g.inn[v] & rest).count_ones() as u16;
            best = best.max(val);
        }
        dp[s] = best;
    }
    // Peel off the last vertex of an optimal ordering, smallest id first.
    let mut position = vec![0usize; n];
    let mut set = g.all();
    for pos in (0..n).rev() {
        let v = members(set)
            .find(|&v| {
                let rest = set & !bit(v);
                dp[rest as usize] + (g.inn[v] & rest).count_ones() as u16 == dp[set as usize]
            })
            .expect("dp is consistent");
        position[v] = pos;
        set &= !bit(v);
    }
    let (kept, removed) = edges.iter().partition(|&&(u, v)| position[u] < position[v]);
    Ok((kept, removed))
}

// ---------------------------------------------------------------------------
// Density objectives

fn pair_count(g: &Adjacency, size: i64) -> i64 {
    if g.directed {
        size * (size - 1)
    } else {
        size * (size - 1) / 2
    }
}

/// Connected vertex sets (>= 2 nodes) of minimum edge density, via Gray-code
/// enumeration of every subset with incremental inner-weight updates.
fn min_density_subgraph(g: &Adjacency, budget: &Budget) -> Result<GraphSolution, SolveError> {
    let n = g.n;
    let mut mask = 0u32;
    let mut weight = 0i64;
    let mut best: Option<(i64, i64, u32)> = None;
    let total: u64 = 1 << n;
    for i in 1..total {
        if i & 0xfff == 0 {
            budget.tick(0x1000)?;
        }
        let v = i.trailing_zeros() as usize;
        let vb = bit(v);
        let mut delta = 0i64;
        for u in members(g.und[v] & mask) {
            delta += g.weight(v, u) as i64 + if g.directed { g.weight(u, v) as i64 } else { 0 };
        }
        if mask & vb != 0 {
            mask &= !vb;
            weight -= delta;
        } else {
            mask |= vb;
            weight += delta;
        }
        let size = mask.count_ones() as i64;
        if size < 2 {
            continue;
        }
        let den = pair_count(g, size);
        let better = match best {
            None => true,
            Some((bn, bd, bm)) => match (weight as i128 * bd as i128).cmp(&(bn as i128 * den as i128)) {
                Ordering::Less => true,
                Ordering::Equal => lex_cmp(mask, bm) == Ordering::Less,
                Ordering::Greater => false,
            },
        };
        if better && g.connected_within(mask) {
            best = Some((weight, den, mask));
        }
    }
    let (num, den, mask) = best.expect("a graph with an edge has a connected pair");
    Ok(GraphSolution {
        value: Objective::Ratio { num, den },
        witness: GroundTruth::VertexSet { nodes: to_vec(mask) },
        exists: true,
    })
}

fn densest_k(g: &Adjacency, k: usize, budget: &Budget) -> Result<GraphSolution, SolveError> {
    let limit = g.all();
    let mut set = (1u32 << k) - 1;
    let mut best: Option<(i64, u32)> = None;
    let mut visited = 0u64;
    loop {
        visited += 1;
        if visited & 0xfff == 0 {
            budget.tick(0x1000)?;
        }
        let w = g.inner_weight(set);
        let better = match best {
            None => true,
            Some((bw, bm)) => w > bw || (w == bw && lex_cmp(set, bm) == Ordering::Less),
        };
        if better {
            best = Some((w, set));
        }
        match next_combination(set, limit) {
            Some(next) => set = next,
            None => break,
        }
    }
    let (num, mask) = best.expect("k <= n");
    Ok(GraphSolution {
        value: Objective::Ratio { num, den: pair_count(g, k as i64) },
        witness: GroundTruth::VertexSet { nodes: to_vec(mask) },
        exists: true,
    })
}

// ---------------------------------------------------------------------------
// Balanced cut

fn cut_size(g: &Adjacency, side: u32) -> i64 {
    let other = g.all() & !side;
    members(side).map(|v| (g.und[v] & other).count_ones() as i64).sum()
}

/// Enumerates every part containing node 0 with a balanced size.
fn balanced_cut(g: &Adjacency, budget: &Budget) -> Result<GraphSolution, SolveError> {
    let n = g.n;
    // Combinations of nodes 1..n, enumerated in an (n-1)-bit space and shifted.
    let rest_limit = (1u32 << (n - 1)) - 1;
    let mut sizes = vec![n / 2];
    if n % 2 == 1 {
        sizes.push(n / 2 + 1);
    }
    let mut best: Option<(i64, u32)> = None;
    let mut visited = 0u64;
    for size in sizes {
        // Node 0 plus `size - 1` of nodes 1..n.
        let mut rest = (1u32 << (size - 1)) - 1;
        loop {
            visited += 1;
            if visited & 0xfff == 0 {
                budget.tick(0x1000)?;
            }
            let side = rest << 1 | 1;
            let cut = cut_size(g, side);
            let better = match best {
                None => true,
                Some((bc, bm)) => cut < bc || (cut == bc && lex_cmp(side, bm) == Ordering::Less),
            };
            if better {
                best = Some((cut, side));
            }
            if rest == 0 {
                break;
            }
            match next_combination(rest, rest_limit) {
                Some(next) => rest = next,
                None => break,
            }
        }
    }
    let (cut, side) = best.expect("n >= 5");
    Ok(GraphSolution {
        value: Objective::int(cut),
        witness: GroundTruth::Partition { parts: (to_vec(side), to_vec(g.all() & !side)) },
        exists: true,
    })
}

// ---------------------------------------------------------------------------
// Paths

/// `ext[mask * n + v]`: best additional weight walking from `v` when `mask` is visited.
fn longest_path(g: &Adjacency, budget: &Budget) -> Result<GraphSolution, SolveError> {
    let n = g.n;
    let size = 1usize << n;
    let mut ext = vec![0i16; size * n];
    for mask in (1..size).rev() {
        if mask & 0x3ff == 0 {
            budget.tick(0x400 * n as u64)?;
        }
        let set = mask as u32;
        for v in members(set) {
            let mut best = 0i16;
            for u in members(g.out[v] & !set) {
                let cand = g.weight(v, u) as i16 + ext[(mask | (1 << u)) * n + u];
                best = best.max(cand);
            }
            ext[mask * n + v] = best;
        }
    }
    let optimum = (0..n).map(|v| ext[(1 << v) * n + v]).max().expect("n >= 5");
    let start = (0..n).find(|&v| ext[(1 << v) * n + v] == optimum).expect("max exists");
    let mut path = vec![start];
    let (mut v, mut mask, mut remaining) = (start, 1usize << start, optimum);
    while remaining > 0 {
        let u = members(g.out[v] & !(mask as u32))
            .find(|&u| g.weight(v, u) as i16 + ext[(mask | (1 << u)) * n + u] == remaining)
            .expect("dp is consistent");
        remaining -= g.weight(v, u) as i16;
        mask |= 1 << u;
        path.push(u);
        v = u;
    }
    Ok(GraphSolution {
        value: Objective::int(optimum as i64),
        witness: GroundTruth::NodeSequence { nodes: path },
        exists: true,
    })
}

/// `ok[mask]`: vertices of `mask` from which the unvisited rest can be
/// covered (and, for cycles, closed back to node 0).
fn hamiltonian(g: &Adjacency, cycle: bool, budget: &Budget) -> Result<GraphSolution, SolveError> {
    let n = g.n;
    let size = 1usize << n;
    let all = g.all();
    let mut ok = vec![0u32; size];
    ok[size - 1] = if cycle { g.inn[0] } else { all };
    for mask in (1..size - 1).rev() {
        if mask & 0x3ff == 0 {
            budget.tick(0x400 * n as u64)?;
        }
        let set = mask as u32;
        if cycle && set & 1 == 0 {
            continue;
        }
        let mut good = 0u32;
        for v in members(set) {
            if members(g.out[v] & !set).any(|u| ok[mask | (1 << u)] & bit(u) != 0) {
                good |= bit(v);
            }
        }
        ok[mask] = good;
    }
    let start = if cycle { (ok[1] & 1 != 0).then_some(0) } else { (0..n).find(|&v| ok[1 << v] & bit(v) != 0) };
    let Some(start) = start else {
        return Ok(GraphSolution {
            value: Objective::int(0),
            witness: GroundTruth::NodeSequence { nodes: vec![] },
            exists: false,
        });
    };
    let mut path = vec![start];
    let (mut v, mut mask) = (start, 1usize << start);
    while mask != size - 1 {
        let u = members(g.out[v] & !(mask as u32))
            .find(|&u| ok[mask | (1 << u)] & bit(u) != 0)
            .expect("dp is consistent");
        mask |= 1 << u;
        path.push(u);
        v = u;
    }
    Ok(GraphSolution {
        value: Objective::int(n as i64),
        witness: GroundTruth::NodeSequence { nodes: path },
        exists: true,
    })
}

// ---------------------------------------------------------------------------
// Distances

const UNREACHABLE: i64 = i64::MAX / 4;

/// Floyd-Warshall over edge weights (1 on unweighted graphs).
pub(crate) fn all_pairs(g: &Adjacency) -> Result<Vec<i64>, SolveError> {
    let n = g.n;
    let mut d = vec![UNREACHABLE; n * n];
    for u in 0..n {
        d[u * n + u] = 0;
        for v in members(g.out[u]) {
            d[u * n + v] = g.weight(u, v) as i64;
        }
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i * n + k];
            if dik == UNREACHABLE {
                continue;
            }
            for j in 0..n {
                let via = dik + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    if d.iter().any(|&x| x == UNREACHABLE) {
        return Err(SolveError::Disconnected(if g.directed { "strongly " } else { "" }));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    fn problem(n: usize, edges: &[(usize, usize)], op: GraphOperator) -> GraphProblem {
        GraphProblem {
            n_nodes: n,
            edges: edges.iter().map(|&(u, v)| Edge { u, v, w: 1 }).collect(),
            directed: false,
            weighted: false,
            operator: op,
            k: None,
        }
    }

    fn solve(p: &GraphProblem) -> GraphSolution {
        solve_exact(p, &Budget::unlimited()).unwrap()
    }

    #[test]
    fn worked_mis_example() {
        let sol = solve(&problem(5, &[(0, 2), (0, 4)], GraphOperator::MaximumIndependentSet));
        assert_eq!(sol.value, Objective::int(4));
        assert_eq!(sol.witness, GroundTruth::VertexSet { nodes: vec![1, 2, 3, 4] });
    }

    #[test]
    fn path_graph_diameter() {
        let mut p = problem(5, &[(0, 1), (1, 2), (2, 3), (3, 4)], GraphOperator::GraphDiameter);
        assert_eq!(solve(&p).value, Objective::int(4));
        p.operator = GraphOperator::GraphRadius;
        assert_eq!(solve(&p).value, Objective::int(2));
    }

    #[test]
    fn disconnected_diameter_is_error() {
        let p = problem(5, &[(0, 1)], GraphOperator::GraphDiameter);
        assert!(matches!(solve_exact(&p, &Budget::unlimited()), Err(SolveError::Disconnected(_))));
    }

    fn complete(n: usize) -> Vec<(usize, usize)> {
        (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect()
    }

    #[test]
    fn complete_graph_is_hamiltonian() {
        let sol = solve(&problem(5, &complete(5), GraphOperator::HamiltonianCycle));
        assert!(sol.exists);
        assert_eq!(sol.witness, GroundTruth::NodeSequence { nodes: vec![0, 1, 2, 3, 4] });
    }

    #[test]
    fn star_has_no_hamiltonian_path() {
        let sol = solve(&problem(5, &[(0, 1), (0, 2), (0, 3), (0, 4)], GraphOperator::HamiltonianPath));
        assert!(!sol.exists);
        assert_eq!(sol.witness, GroundTruth::NodeSequence { nodes: vec![] });
    }

    #[test]
    fn clique_in_k5_minus_edge() {
        let edges: Vec<_> = complete(5).into_iter().filter(|&e| e != (0, 1)).collect();
        let sol = solve(&problem(5, &edges, GraphOperator::MaximumClique));
        assert_eq!(sol.witness, GroundTruth::VertexSet { nodes: vec![0, 2, 3, 4] });
    }

    #[test]
    fn vertex_cover_of_triangle_plus_pendant() {
        let p = problem(5, &[(0, 1), (1, 2), (0, 2), (2, 3)], GraphOperator::MinimumVertexCover);
        let sol = solve(&p);
        assert_eq!(sol.value, Objective::int(2));
        assert_eq!(sol.witness, GroundTruth::VertexSet { nodes: vec![0, 2] });
    }

    #[test]
    fn feedback_sets_of_two_triangles() {
        let edges = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)];
        let fvs = solve(&problem(5, &edges, GraphOperator::FeedbackVertexSet));
        assert_eq!(fvs.witness, GroundTruth::VertexSet { nodes: vec![2] });
        let fes = solve(&problem(5, &edges, GraphOperator::FeedbackEdgeSet));
        assert_eq!(fes.value, Objective::int(2));
        assert_eq!(fes.witness, GroundTruth::EdgeSet { edges: vec![(0, 1), (2, 3)] });
        let forest = solve(&problem(5, &edges, GraphOperator::MaximumAcyclicSubgraph));
        assert_eq!(forest.value, Objective::int(4));
    }

    #[test]
    fn directed_cycle_feedback() {
        let mut p = problem(5, &[(0, 1), (1, 2), (2, 0), (3, 4)], GraphOperator::FeedbackEdgeSet);
        p.directed = true;
        assert_eq!(solve(&p).value, Objective::int(1));
        p.operator = GraphOperator::FeedbackVertexSet;
        assert_eq!(solve(&p).value, Objective::int(1));
        p.operator = GraphOperator::MaximumAcyclicSubgraph;
        assert_eq!(solve(&p).value, Objective::int(3));
    }

    #[test]
    fn balanced_cut_of_two_cliques() {
        // Two triangles joined by one edge, n = 6.
        let p = problem(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)], GraphOperator::BalancedCut);
        let sol = solve(&p);
        assert_eq!(sol.value, Objective::int(1));
        assert_eq!(sol.witness, GroundTruth::Partition { parts: (vec![0, 1, 2], vec![3, 4, 5]) });
    }

    #[test]
    fn balanced_cut_parts_stay_balanced() {
        for n in 5..=12 {
            let p = problem(n, &[(0, 1), (1, 2)], GraphOperator::BalancedCut);
            let GroundTruth::Partition { parts: (a, b) } = solve(&p).witness else { panic!() };
            assert!(a.len().abs_diff(b.len()) <= 1 && a.len() + b.len() == n, "{n}: {a:?} {b:?}");
        }
    }

    #[test]
    fn density_and_densest_k() {
        let mut p = problem(5, &[(0, 1), (1, 2), (0, 2), (2, 3)], GraphOperator::GraphDensity);
        let sol = solve(&p);
        assert_eq!(sol.value, Objective::Ratio { num: 4, den: 10 });
        assert_eq!(sol.witness, GroundTruth::Real { value: 0.4, decimals: 3 });
        p.operator = GraphOperator::DensestKSubgraph;
        p.k = Some(3);
        let sol = solve(&p);
        assert_eq!(sol.witness, GroundTruth::VertexSet { nodes: vec![0, 1, 2] });
        p.operator = GraphOperator::MinimumDensitySubgraph;
        p.k = None;
        // [0, 1, 2, 3], [0, 2, 3] and [1, 2, 3] all reach 2/3; the lexicographic tie-break picks the first.
        let sol = solve(&p);
        assert_eq!(sol.witness, GroundTruth::VertexSet { nodes: vec![0, 1, 2, 3] });
        assert_eq!(sol.value, Objective::Ratio { num: 4, den: 6 });
    }

    #[test]
    fn weighted_longest_path() {
        let mut p = problem(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)], GraphOperator::LongestPath);
        p.weighted = true;
        p.edges[4].w = 10;
        let sol = solve(&p);
        // 1-0-4-3-2 and 0-4-3-2-1 both weigh 13; the lexicographically smaller one is returned.
        assert_eq!(sol.value, Objective::int(13));
        assert_eq!(sol.witness, GroundTruth::NodeSequence { nodes: vec![0, 4, 3, 2, 1] });
    }

    #[test]
    fn budget_is_enforced() {
        let p = problem(20, &complete(20), GraphOperator::HamiltonianPath);
        let budget = Budget::new(1000, None);
        assert_eq!(solve_exact(&p, &budget), Err(SolveError::BudgetExceeded));
    }

    #[test]
    fn round_ratio_half_away() {
        assert_eq!(round_ratio(1, 8, 2), 0.13);
        assert_eq!(round_ratio(-1, 8, 2), -0.13);
        assert_eq!(round_ratio(2, 3, 3), 0.667);
    }
}
