//! Bitmask adjacency used by the solvers and validators (n <= 25 fits a u32).

use std::cmp::Ordering;

use super::GraphProblem;

pub(crate) fn bit(v: usize) -> u32 {
    1u32 << v
}

pub(crate) fn full(n: usize) -> u32 {
    if n == 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

pub(crate) fn members(mut mask: u32) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let v = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(v)
        }
    })
}

pub(crate) fn to_vec(mask: u32) -> Vec<usize> {
    members(mask).collect()
}

/// Orders masks as their ascending member lists would compare lexicographically.
pub(crate) fn lex_cmp(a: u32, b: u32) -> Ordering {
    let diff = a ^ b;
    if diff == 0 {
        return Ordering::Equal;
    }
    let d = diff.trailing_zeros();
    let above = !((1u64 << (d + 1)) - 1) as u32;
    if a & (1 << d) != 0 {
        // a holds d where b holds something larger, or b has already ended.
        if b & above != 0 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    } else if a & above != 0 {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

/// Next mask with the same popcount (Gosper's hack); `None` past `limit`.
pub(crate) fn next_combination(x: u32, limit: u32) -> Option<u32> {
    let c = x & x.wrapping_neg();
    let r = x.checked_add(c)?;
    let next = (((r ^ x) >> 2) / c) | r;
    (next <= limit && next != 0).then_some(next)
}

#[derive(Debug, Clone)]
pub(crate) struct Adjacency {
    pub n: usize,
    /// Out-neighbours (all neighbours when undirected).
    pub out: Vec<u32>,
    pub inn: Vec<u32>,
    /// Symmetrised neighbourhoods.
    pub und: Vec<u32>,
    /// Dense weight matrix, 0 = no edge.
    pub w: Vec<u32>,
    pub directed: bool,
}

impl Adjacency {
    pub fn new(p: &GraphProblem) -> Self {
        let n = p.n_nodes;
        let mut adj = Adjacency {
            n,
            out: vec![0; n],
            inn: vec![0; n],
            und: vec![0; n],
            w: vec![0; n * n],
            directed: p.directed,
        };
        for e in &p.edges {
            adj.out[e.u] |= bit(e.v);
            adj.inn[e.v] |= bit(e.u);
            adj.und[e.u] |= bit(e.v);
            adj.und[e.v] |= bit(e.u);
            adj.w[e.u * n + e.v] = e.w;
            if !p.directed {
                adj.out[e.v] |= bit(e.u);
                adj.inn[e.u] |= bit(e.v);
                adj.w[e.v * n + e.u] = e.w;
            }
        }
        adj
    }

    pub fn all(&self) -> u32 {
        full(self.n)
    }

    pub fn weight(&self, u: usize, v: usize) -> u32 {
        self.w[u * self.n + v]
    }

    pub fn has_arc(&self, u: usize, v: usize) -> bool {
        self.out[u] & bit(v) != 0
    }

    /// Complement of the undirected adjacency.
    pub fn complement(&self) -> Vec<u32> {
        let all = self.all();
        (0..self.n).map(|v| all & !self.und[v] & !bit(v)).collect()
    }

    /// Total weight of edges with both endpoints in `set` (arcs counted once each).
    pub fn inner_weight(&self, set: u32) -> i64 {
        let mut total = 0i64;
        for u in members(set) {
            for v in members(self.out[u] & set) {
                total += self.weight(u, v) as i64;
            }
        }
        if self.directed {
            total
        } else {
            total / 2
        }
    }

    /// Weakly connected when restricted to `set`.
    pub fn connected_within(&self, set: u32) -> bool {
        if set == 0 {
            return false;
        }
        let start = set & set.wrapping_neg();
        let mut seen = start;
        let mut frontier = start;
        while frontier != 0 {
            let mut next = 0;
            for v in members(frontier) {
                next |= self.und[v] & set;
            }
            frontier = next & !seen;
            seen |= next;
        }
        seen == set
    }

    /// True when the subgraph induced by `set` has no (directed) cycle.
    pub fn induced_acyclic(&self, set: u32) -> bool {
        if self.directed {
            // Kahn's algorithm on the induced subgraph.
            let mut remaining = set;
            loop {
                let sources: u32 = members(remaining).filter(|&v| self.inn[v] & remaining == 0).fold(0, |m, v| m | bit(v));
                if sources == 0 {
                    return remaining == 0;
                }
                remaining &= !sources;
            }
        } else {
            let vertices = set.count_ones() as i64;
            let edges = self.inner_weight_unit(set);
            let comps = self.components_within(set) as i64;
            edges == vertices - comps
        }
    }

    fn inner_weight_unit(&self, set: u32) -> i64 {
        let s: u32 = members(set).map(|v| (self.und[v] & set).count_ones()).sum();
        if self.directed {
            s as i64
        } else {
            s as i64 / 2
        }
    }

    pub fn components_within(&self, set: u32) -> usize {
        let mut left = set;
        let mut count = 0;
        while left != 0 {
            let start = left & left.wrapping_neg();
            let mut seen = start;
            let mut frontier = start;
            while frontier != 0 {
                let mut next = 0;
                for v in members(frontier) {
                    next |= self.und[v] & set;
                }
                frontier = next & !seen;
                seen |= next;
            }
            left &= !seen;
            count += 1;
        }
        count
    }
}
