//! Graph reasoning problems: small graphs (5-25 nodes), one operator each,
//! solved exactly and verified against any co-optimal candidate.

mod bits;
mod generate;
mod render;
mod solve;
mod verify;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_graphs, generate_graphs_with_stats, instance_from_problem, GraphConfig, GraphGenError, GraphGenStats};
pub use render::render_graph_prompt;
pub use solve::{solve_exact, Budget, GraphSolution, Objective, SolveError};
pub use verify::{
    evaluate_candidate, solution_from_witness, verify_answer, verify_value, CandidateEval, Verdict, Verification,
};

use crate::types::ComplexityMeta;

pub const MIN_NODES: usize = 5;
pub const MAX_NODES: usize = 25;
/// Node cap for operators solved by bitmask dynamic programming over all subsets.
pub const DP_NODE_CAP: usize = 20;
pub const MAX_WEIGHT: u32 = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph has {0} nodes (supported: {MIN_NODES}-{MAX_NODES})")]
    NodeCount(usize),
    #[error("node list must be exactly 0..n-1")]
    NodeIds,
    #[error("edge ({0}, {1}) references a missing node")]
    EdgeOutOfRange(usize, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("weights must be given for every edge of a weighted graph and lie in 1..={MAX_WEIGHT}")]
    Weights,
    #[error("operator `{0}` does not accept {1} graphs")]
    Incompatible(GraphOperator, &'static str),
    #[error("operator `{0}` needs {1}")]
    Parameter(GraphOperator, String),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
}

/// The graph operator taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphOperator {
    MinimumDensitySubgraph,
    MaximumClique,
    MaximumIndependentSet,
    MinimumVertexCover,
    MaximumInducedBipartiteSubgraph,
    MaximumAcyclicSubgraph,
    DensestKSubgraph,
    BalancedCut,
    FeedbackVertexSet,
    FeedbackEdgeSet,
    LongestPath,
    HamiltonianPath,
    HamiltonianCycle,
    GraphDiameter,
    GraphRadius,
    GraphDensity,
}

impl GraphOperator {
    pub const ALL: [GraphOperator; 16] = [
        GraphOperator::MinimumDensitySubgraph,
        GraphOperator::MaximumClique,
        GraphOperator::MaximumIndependentSet,
        GraphOperator::MinimumVertexCover,
        GraphOperator::MaximumInducedBipartiteSubgraph,
        GraphOperator::MaximumAcyclicSubgraph,
        GraphOperator::DensestKSubgraph,
        GraphOperator::BalancedCut,
        GraphOperator::FeedbackVertexSet,
        GraphOperator::FeedbackEdgeSet,
        GraphOperator::LongestPath,
        GraphOperator::HamiltonianPath,
        GraphOperator::HamiltonianCycle,
        GraphOperator::GraphDiameter,
        GraphOperator::GraphRadius,
        GraphOperator::GraphDensity,
    ];

    pub fn as_str(self) -> &'static str {
        use GraphOperator::*;
        match self {
            MinimumDensitySubgraph => "minimum_density_subgraph",
            MaximumClique => "maximum_clique",
            MaximumIndependentSet => "maximum_independent_set",
            MinimumVertexCover => "minimum_vertex_cover",
            MaximumInducedBipartiteSubgraph => "maximum_induced_bipartite_subgraph",
            MaximumAcyclicSubgraph => "maximum_acyclic_subgraph",
            DensestKSubgraph => "densest_k_subgraph",
            BalancedCut => "balanced_cut",
            FeedbackVertexSet => "feedback_vertex_set",
            FeedbackEdgeSet => "feedback_edge_set",
            LongestPath => "longest_path",
            HamiltonianPath => "hamiltonian_path",
            HamiltonianCycle => "hamiltonian_cycle",
            GraphDiameter => "graph_diameter",
            GraphRadius => "graph_radius",
            GraphDensity => "graph_density",
        }
    }

    /// Whether the operator is defined on directed graphs.
    pub fn allows_directed(self) -> bool {
        use GraphOperator::*;
        matches!(
            self,
            MaximumAcyclicSubgraph
                | DensestKSubgraph
                | FeedbackVertexSet
                | FeedbackEdgeSet
                | LongestPath
                | HamiltonianPath
                | HamiltonianCycle
                | GraphDiameter
                | GraphRadius
                | GraphDensity
        )
    }

    /// Path, distance and density-objective operators take edge weights; set operators do not.
    pub fn allows_weights(self) -> bool {
        use GraphOperator::*;
        matches!(self, MinimumDensitySubgraph | DensestKSubgraph | LongestPath | GraphDiameter | GraphRadius)
    }

    /// Largest graph the generator produces for this operator.
    pub fn node_cap(self, directed: bool) -> usize {
        use GraphOperator::*;
        match self {
            LongestPath | HamiltonianPath | HamiltonianCycle => DP_NODE_CAP,
            MaximumAcyclicSubgraph | FeedbackEdgeSet if directed => DP_NODE_CAP,
            _ => MAX_NODES,
        }
    }
}

impl fmt::Display for GraphOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GraphOperator {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GraphOperator::ALL
            .into_iter()
            .find(|op| op.as_str() == s.trim())
            .ok_or_else(|| GraphError::UnknownOperator(s.to_string()))
    }
}

/// A directed or undirected edge; `w` is 1 on unweighted graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: u32,
}

/// One graph task. Nodes are always `0..n_nodes`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GraphWire", into = "GraphWire")]
pub struct GraphProblem {
    pub n_nodes: usize,
    pub edges: Vec<Edge>,
    pub directed: bool,
    pub weighted: bool,
    pub operator: GraphOperator,
    /// Subgraph size for [`GraphOperator::DensestKSubgraph`].
    pub k: Option<usize>,
}

impl GraphProblem {
    pub fn validate(&self) -> Result<(), GraphError> {
        let n = self.n_nodes;
        if !(MIN_NODES..=MAX_NODES).contains(&n) {
            return Err(GraphError::NodeCount(n));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            if e.u >= n || e.v >= n {
                return Err(GraphError::EdgeOutOfRange(e.u, e.v));
            }
            if e.u == e.v {
                return Err(GraphError::SelfLoop(e.u));
            }
            let key = if self.directed { (e.u, e.v) } else { (e.u.min(e.v), e.u.max(e.v)) };
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(e.u, e.v));
            }
            let w_ok = if self.weighted { (1..=MAX_WEIGHT).contains(&e.w) } else { e.w == 1 };
            if !w_ok {
                return Err(GraphError::Weights);
            }
        }
        if self.directed && !self.operator.allows_directed() {
            return Err(GraphError::Incompatible(self.operator, "directed"));
        }
        if self.weighted && !self.operator.allows_weights() {
            return Err(GraphError::Incompatible(self.operator, "weighted"));
        }
        match (self.operator, self.k) {
            (GraphOperator::DensestKSubgraph, Some(k)) if (2..n).contains(&k) => Ok(()),
            (GraphOperator::DensestKSubgraph, _) => {
                Err(GraphError::Parameter(self.operator, format!("k in 2..={}", n - 1)))
            }
            (_, Some(_)) => Err(GraphError::Parameter(self.operator, "no k parameter".into())),
            (_, None) => Ok(()),
        }
    }

    pub fn max_edges(&self) -> usize {
        let n = self.n_nodes;
        if self.directed {
            n * (n - 1)
        } else {
            n * (n - 1) / 2
        }
    }
}

pub fn complexity(problem: &GraphProblem) -> ComplexityMeta {
    ComplexityMeta::Graph {
        n_nodes: problem.n_nodes,
        n_edges: problem.edges.len(),
        directed: problem.directed,
        weighted: problem.weighted,
    }
}

/// The on-disk shape of a graph spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphWire {
    nodes: Vec<usize>,
    edges: Vec<(usize, usize)>,
    directed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<u32>>,
    operator: GraphOperator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
}

impl From<GraphProblem> for GraphWire {
    fn from(p: GraphProblem) -> Self {
        GraphWire {
            nodes: (0..p.n_nodes).collect(),
            edges: p.edges.iter().map(|e| (e.u, e.v)).collect(),
            directed: p.directed,
            weights: p.weighted.then(|| p.edges.iter().map(|e| e.w).collect()),
            operator: p.operator,
            k: p.k,
        }
    }
}

impl TryFrom<GraphWire> for GraphProblem {
    type Error = GraphError;

    fn try_from(w: GraphWire) -> Result<Self, Self::Error> {
        if w.nodes.iter().copied().ne(0..w.nodes.len()) {
            return Err(GraphError::NodeIds);
        }
        let weighted = w.weights.is_some();
        let weights = match w.weights {
            Some(ws) if ws.len() == w.edges.len() => ws,
            Some(_) => return Err(GraphError::Weights),
            None => vec![1; w.edges.len()],
        };
        let problem = GraphProblem {
            n_nodes: w.nodes.len(),
            edges: w.edges.iter().zip(weights).map(|(&(u, v), w)| Edge { u, v, w }).collect(),
            directed: w.directed,
            weighted,
            operator: w.operator,
            k: w.k,
        };
        problem.validate()?;
        Ok(problem)
    }
}
