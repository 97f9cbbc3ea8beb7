//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rlvr_core::counting::{AggregateOp, CountingSpec, PipelineStep};
use rlvr_core::graph::{GraphOperator, GraphProblem, Objective};
use rlvr_core::spatial::{Action, Cardinal, MoveDirection, Query, SpatialProblem, Turn};
use rlvr_core::GroundTruth;

// ---------------------------------------------------------------------------
// Counting

/// Straight-line interpreter over i128 with no shared helpers.
pub fn naive_counting(spec: &CountingSpec) -> Option<GroundTruth> {
    let mut xs: Vec<i128> = Vec::new();
    let mut x = spec.range_lo as i128;
    while x <= spec.range_hi as i128 {
        xs.push(x);
        x += 1;
    }
    for step in &spec.pipeline {
        let mut next = Vec::new();
        for &v in &xs {
            let out = match *step {
                PipelineStep::KeepEven => (v % 2 == 0).then_some(v),
                PipelineStep::KeepOdd => (v % 2 != 0).then_some(v),
                PipelineStep::KeepPositive => (v > 0).then_some(v),
                PipelineStep::KeepNegative => (v < 0).then_some(v),
                PipelineStep::KeepDivisibleBy { n } => (v % n as i128 == 0).then_some(v),
                PipelineStep::KeepBelow { t } => (v < t as i128).then_some(v),
                PipelineStep::KeepAbove { t } => (v > t as i128).then_some(v),
                PipelineStep::AddConstant { k } => Some(v + k as i128),
                PipelineStep::MultiplyConstant { k } => Some(v * k as i128),
                PipelineStep::Negate => Some(-v),
                PipelineStep::Square => Some(v * v),
                PipelineStep::AbsoluteValue => Some(v.abs()),
                PipelineStep::ModuloConstant { m } => {
                    let m = m as i128;
                    let mut r = v % m;
                    if r < 0 {
                        r += m;
                    }
                    Some(r)
                }
            };
            if let Some(o) = out {
                next.push(o);
            }
        }
        xs = next;
    }
    if xs.is_empty() {
        return None;
    }
    let int = |v: i128| GroundTruth::Int { value: v as i64 };
    let cnt = |f: &dyn Fn(i128) -> bool| int(xs.iter().filter(|&&v| f(v)).count() as i128);
    let centi = |num: i128, den: i128| {
        // Round half away from zero by comparing twice the remainder.
        let (q, r) = (num.abs() / den, num.abs() % den);
        let q = if 2 * r >= den { q + 1 } else { q };
        let q = if num < 0 { -q } else { q };
        GroundTruth::Real { value: q as f64 / 100.0, decimals: 2 }
    };
    let mut sorted = xs.clone();
    sorted.sort();
    let (min, max) = (sorted[0], *sorted.last().unwrap());
    Some(match spec.final_op {
        AggregateOp::Count => int(xs.len() as i128),
        AggregateOp::UniqueCount => {
            let mut d = sorted.clone();
            d.dedup();
            int(d.len() as i128)
        }
        AggregateOp::ZeroCount => cnt(&|v| v == 0),
        AggregateOp::EvenCount => cnt(&|v| v % 2 == 0),
        AggregateOp::OddCount => cnt(&|v| v % 2 != 0),
        AggregateOp::PositiveCount => cnt(&|v| v > 0),
        AggregateOp::NegativeCount => cnt(&|v| v < 0),
        AggregateOp::DivisibleByNCount { n } => cnt(&|v| v % n as i128 == 0),
        AggregateOp::BelowThresholdCount { t } => cnt(&|v| v < t as i128),
        AggregateOp::AboveThresholdCount { t } => cnt(&|v| v > t as i128),
        AggregateOp::Sum => int(xs.iter().sum()),
        AggregateOp::Product => int(if xs.contains(&0) { 0 } else { xs.iter().fold(1i128, |a, &v| a.checked_mul(v).expect("bounded product")) }),
        AggregateOp::Mean => centi(xs.iter().sum::<i128>() * 100, xs.len() as i128),
        AggregateOp::Median => {
            let n = sorted.len();
            if n % 2 == 1 {
                centi(sorted[n / 2] * 100, 1)
            } else {
                centi((sorted[n / 2 - 1] + sorted[n / 2]) * 100, 2)
            }
        }
        AggregateOp::Mode => {
            let (mut best, mut best_n, mut i) = (sorted[0], 0, 0);
            while i < sorted.len() {
                let mut j = i;
                while j < sorted.len() && sorted[j] == sorted[i] {
                    j += 1;
                }
                if j - i > best_n {
                    best_n = j - i;
                    best = sorted[i];
                }
                i = j;
            }
            int(best)
        }
        AggregateOp::Min => int(min),
        AggregateOp::Max => int(max),
        AggregateOp::Range => int(max - min),
        AggregateOp::BitwiseAnd => int(xs.iter().fold(!0, |a, &v| a & v)),
        AggregateOp::BitwiseOr => int(xs.iter().fold(0, |a, &v| a | v)),
        AggregateOp::BitwiseXor => int(xs.iter().fold(0, |a, &v| a ^ v)),
        AggregateOp::BitwiseNand => {
            let and = xs.iter().fold(!0i128, |a, &v| a & v);
            let width = format!("{max:b}").len();
            int(!and & ((1i128 << width) - 1))
        }
    })
}

// ---------------------------------------------------------------------------
// Graph

/// Weight matrix view of a problem; undirected edges appear in both directions.
pub struct Dense {
    pub n: usize,
    pub directed: bool,
    pub w: Vec<Vec<Option<i64>>>,
    pub m: usize,
}

impl Dense {
    pub fn new(p: &GraphProblem) -> Self {
        let mut w = vec![vec![None; p.n_nodes]; p.n_nodes];
        for e in &p.edges {
            w[e.u][e.v] = Some(e.w as i64);
            if !p.directed {
                w[e.v][e.u] = Some(e.w as i64);
            }
        }
        Dense { n: p.n_nodes, directed: p.directed, w, m: p.edges.len() }
    }

    fn adj(&self, u: usize, v: usize) -> bool {
        self.w[u][v].is_some()
    }

    fn either(&self, u: usize, v: usize) -> bool {
        self.adj(u, v) || self.adj(v, u)
    }

    fn members(&self, s: u32) -> Vec<usize> {
        (0..self.n).filter(|&v| s >> v & 1 == 1).collect()
    }

    fn inner_weight(&self, s: u32) -> i64 {
        let vs = self.members(s);
        let mut total = 0;
        for &u in &vs {
            for &v in &vs {
                if let Some(w) = self.w[u][v] {
                    if self.directed || u < v {
                        total += w;
                    }
                }
            }
        }
        total
    }

    fn pairs(&self, k: i64) -> i64 {
        if self.directed {
            k * (k - 1)
        } else {
            k * (k - 1) / 2
        }
    }

    fn connected(&self, s: u32) -> bool {
        let vs = self.members(s);
        let mut seen = vec![false; self.n];
        let mut stack = vec![vs[0]];
        seen[vs[0]] = true;
        while let Some(u) = stack.pop() {
            for &v in &vs {
                if !seen[v] && self.either(u, v) {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        vs.iter().all(|&v| seen[v])
    }

    fn bipartite(&self, s: u32) -> bool {
        let vs = self.members(s);
        let mut colour = vec![0i8; self.n];
        for &start in &vs {
            if colour[start] != 0 {
                continue;
            }
            colour[start] = 1;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &v in &vs {
                    if self.either(u, v) {
                        if colour[v] == 0 {
                            colour[v] = -colour[u];
                            stack.push(v);
                        } else if colour[v] == colour[u] {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Induced subgraph on `s` has no cycle (directed cycles for digraphs).
    fn acyclic(&self, s: u32) -> bool {
        let vs = self.members(s);
        if self.directed {
            let mut alive = s;
            loop {
                let source = (0..self.n)
                    .find(|&v| alive >> v & 1 == 1 && !(0..self.n).any(|u| alive >> u & 1 == 1 && self.adj(u, v)));
                match source {
                    Some(v) => alive &= !(1 << v),
                    None => return alive == 0,
                }
            }
        } else {
            let edges = vs.iter().flat_map(|&u| vs.iter().map(move |&v| (u, v))).filter(|&(u, v)| u < v && self.adj(u, v)).count();
            edges + self.components(s) == vs.len()
        }
    }

    fn components(&self, s: u32) -> usize {
        let mut left = s;
        let mut c = 0;
        while left != 0 {
            c += 1;
            let start = left.trailing_zeros() as usize;
            let mut stack = vec![start];
            left &= !(1 << start);
            while let Some(u) = stack.pop() {
                for v in 0..self.n {
                    if left >> v & 1 == 1 && self.either(u, v) {
                        left &= !(1 << v);
                        stack.push(v);
                    }
                }
            }
        }
        c
    }

    fn best_path(&self, u: usize, seen: u32, weight: i64, len: usize, best: &mut (i64, usize, bool), cycle_from: usize) {
        best.0 = best.0.max(weight);
        best.1 = best.1.max(len);
        if len == self.n && self.adj(u, cycle_from) {
            best.2 = true;
        }
        for v in 0..self.n {
            if seen >> v & 1 == 0 {
                if let Some(w) = self.w[u][v] {
                    self.best_path(v, seen | 1 << v, weight + w, len + 1, best, cycle_from);
                }
            }
        }
    }

    fn distances(&self) -> Vec<Vec<Option<i64>>> {
        let mut d = self.w.clone();
        for (v, row) in d.iter_mut().enumerate() {
            row[v] = Some(0);
        }
        for k in 0..self.n {
            for i in 0..self.n {
                for j in 0..self.n {
                    if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                        if d[i][j].is_none_or(|c| a + b < c) {
                            d[i][j] = Some(a + b);
                        }
                    }
                }
            }
        }
        d
    }
}

fn permutations(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            visit(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn better(a: Objective, b: Objective, maximise: bool) -> bool {
    let o = a.exact_cmp(b);
    if maximise {
        o.is_gt()
    } else {
        o.is_lt()
    }
}

/// Exhaustive optimum. `None` when a distance operator meets an unreachable pair.
pub fn brute_graph(p: &GraphProblem) -> Option<Objective> {
    use GraphOperator::*;
    let g = Dense::new(p);
    let n = g.n;
    let subsets = 0..(1u32 << n);
    let size = |s: u32| s.count_ones() as i64;
    let best_int = |pred: &dyn Fn(u32) -> bool, maximise: bool| {
        let sizes = subsets.clone().filter(|&s| pred(s)).map(size);
        let v = if maximise { sizes.max() } else { sizes.min() };
        Objective::Int { value: v.expect("a feasible set exists") }
    };
    let all = (1u32 << n) - 1;
    Some(match p.operator {
        MaximumClique => best_int(&|s| g.members(s).iter().all(|&u| g.members(s).iter().all(|&v| u == v || g.either(u, v))), true),
        MaximumIndependentSet => best_int(&|s| g.members(s).iter().all(|&u| g.members(s).iter().all(|&v| !g.either(u, v))), true),
        MinimumVertexCover => best_int(
            &|s| (0..n).all(|u| (0..n).all(|v| !g.adj(u, v) || s >> u & 1 == 1 || s >> v & 1 == 1)),
            false,
        ),
        MaximumInducedBipartiteSubgraph => best_int(&|s| g.bipartite(s), true),
        FeedbackVertexSet => best_int(&|s| g.acyclic(all & !s), false),
        MaximumAcyclicSubgraph | FeedbackEdgeSet => {
            let keep = if g.directed {
                let mut best = 0usize;
                permutations(n, |order| {
                    let mut pos = vec![0; n];
                    for (i, &v) in order.iter().enumerate() {
                        pos[v] = i;
                    }
                    let fwd = p.edges.iter().filter(|e| pos[e.u] < pos[e.v]).count();
                    best = best.max(fwd);
                });
                best
            } else {
                n - g.components(all)
            };
            let value = if p.operator == MaximumAcyclicSubgraph { keep } else { g.m - keep };
            Objective::Int { value: value as i64 }
        }
        MinimumDensitySubgraph | DensestKSubgraph => {
            let minimise = p.operator == MinimumDensitySubgraph;
            let mut best: Option<Objective> = None;
            for s in subsets {
                let k = size(s);
                let ok = if minimise { k >= 2 && g.connected(s) } else { k == p.k.unwrap() as i64 };
                if !ok {
                    continue;
                }
                let o = Objective::Ratio { num: g.inner_weight(s), den: g.pairs(k) };
                if best.is_none_or(|b| better(o, b, !minimise)) {
                    best = Some(o);
                }
            }
            best.expect("a feasible set exists")
        }
        BalancedCut => {
            let cut = subsets
                .filter(|&s| (2 * size(s) - n as i64).abs() <= 1)
                .map(|s| p.edges.iter().filter(|e| (s >> e.u & 1) != (s >> e.v & 1)).count() as i64)
                .min()
                .unwrap();
            Objective::Int { value: cut }
        }
        LongestPath | HamiltonianPath | HamiltonianCycle => {
            let mut best = (0i64, 0usize, false);
            let starts: Vec<usize> = if p.operator == HamiltonianCycle { vec![0] } else { (0..n).collect() };
            for s in starts {
                g.best_path(s, 1 << s, 0, 1, &mut best, s);
            }
            let value = match p.operator {
                LongestPath => best.0,
                HamiltonianPath => if best.1 == n { n as i64 } else { 0 },
                _ => if best.2 { n as i64 } else { 0 },
            };
            Objective::Int { value }
        }
        GraphDiameter | GraphRadius => {
            let d = g.distances();
            let mut ecc = Vec::new();
            for row in &d {
                let mut e = 0;
                for x in row {
                    e = e.max((*x)?);
                }
                ecc.push(e);
            }
            let v = if p.operator == GraphDiameter { ecc.into_iter().max() } else { ecc.into_iter().min() };
            Objective::Int { value: v.unwrap() }
        }
        GraphDensity => Objective::Ratio { num: g.m as i64, den: g.pairs(n as i64) },
    })
}

// ---------------------------------------------------------------------------
// Spatial

/// Float-geometry simulator: positions as f64, headings as degrees, board
/// rotation through cos/sin.
pub fn float_simulate(p: &SpatialProblem) -> GroundTruth {
    let mut pos: Vec<(f64, f64)> = p.particles.iter().map(|q| (q.position.0.to_f64(), q.position.1.to_f64())).collect();
    let mut heading: Vec<i32> = p.particles.iter().map(|q| degrees(q.orientation)).collect();
    let mut centre = (p.board.center.0.to_f64(), p.board.center.1.to_f64());
    let idx = |id: &str| p.particles.iter().position(|q| q.id == id).unwrap();
    for a in &p.actions {
        match a {
            Action::ParticleMove { id, direction, steps } => {
                let i = idx(id);
                let rad = (heading[i] as f64).to_radians();
                let s = if *direction == MoveDirection::Forward { *steps as f64 } else { -(*steps as f64) };
                pos[i] = (pos[i].0 + s * rad.cos(), pos[i].1 + s * rad.sin());
            }
            Action::ParticleTurn { id, turn } => {
                let i = idx(id);
                heading[i] += match turn {
                    Turn::Left => 90,
                    Turn::Right => -90,
                    Turn::Around => 180,
                };
            }
            Action::BoardTranslate { dx, dy } => {
                centre = (centre.0 + dx.to_f64(), centre.1 + dy.to_f64());
                for q in &mut pos {
                    *q = (q.0 + dx.to_f64(), q.1 + dy.to_f64());
                }
            }
            Action::BoardRotate { quarter_turns } => {
                let rad = (90.0 * *quarter_turns as f64).to_radians();
                let (c, s) = (rad.cos(), rad.sin());
                for q in &mut pos {
                    let (x, y) = (q.0 - centre.0, q.1 - centre.1);
                    *q = (centre.0 + x * c - y * s, centre.1 + x * s + y * c);
                }
                for h in &mut heading {
                    *h += 90 * *quarter_turns as i32;
                }
            }
        }
    }
    let round = |x: f64| (x * 1000.0).round() / 1000.0 + 0.0;
    match &p.query {
        Query::AbsoluteLocation { id } => {
            let q = pos[idx(id)];
            GroundTruth::Coordinate { x: round(q.0), y: round(q.1) }
        }
        Query::AbsoluteOrientation { id } => GroundTruth::Orientation { value: cardinal(heading[idx(id)]) },
        Query::RelativeLocation { a, b } => {
            let (pa, pb) = (pos[idx(a)], pos[idx(b)]);
            GroundTruth::Coordinate { x: round(pa.0 - pb.0), y: round(pa.1 - pb.1) }
        }
        Query::RelativeOrientation { a, b } => {
            let diff = (heading[idx(a)] - heading[idx(b)]).rem_euclid(360);
            let value = match diff {
                0 => "same",
                90 => "left-of",
                180 => "opposite",
                _ => "right-of",
            };
            GroundTruth::RelativeOrientation { value: value.parse().unwrap() }
        }
    }
}

fn degrees(c: Cardinal) -> i32 {
    match c {
        Cardinal::East => 0,
        Cardinal::North => 90,
        Cardinal::West => 180,
        Cardinal::South => 270,
    }
}

fn cardinal(deg: i32) -> Cardinal {
    match deg.rem_euclid(360) {
        0 => Cardinal::East,
        90 => Cardinal::North,
        180 => Cardinal::West,
        _ => Cardinal::South,
    }
}
