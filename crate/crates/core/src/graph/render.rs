//! Prompt template for graph problems.

use std::fmt::Write;

use super::{GraphOperator, GraphProblem};

fn title(op: GraphOperator, k: Option<usize>) -> String {
    use GraphOperator::*;
    match op {
        MinimumDensitySubgraph => "minimum density subgraph".into(),
        MaximumClique => "maximum clique".into(),
        MaximumIndependentSet => "maximum independent set".into(),
        MinimumVertexCover => "minimum vertex cover".into(),
        MaximumInducedBipartiteSubgraph => "maximum induced bipartite subgraph".into(),
        MaximumAcyclicSubgraph => "maximum acyclic subgraph".into(),
        DensestKSubgraph => format!("densest {}-vertex subgraph", k.unwrap_or(0)),
        BalancedCut => "minimum balanced cut".into(),
        FeedbackVertexSet => "minimum feedback vertex set".into(),
        FeedbackEdgeSet => "minimum feedback edge set".into(),
        LongestPath => "longest simple path".into(),
        HamiltonianPath => "Hamiltonian path".into(),
        HamiltonianCycle => "Hamiltonian cycle".into(),
        GraphDiameter => "diameter".into(),
        GraphRadius => "radius".into(),
        GraphDensity => "density".into(),
    }
}

/// Operator definition plus any convention the answer depends on.
fn definition(p: &GraphProblem) -> String {
    use GraphOperator::*;
    let cycle = if p.directed { "directed cycle" } else { "cycle" };
    let size = if p.weighted { "total edge weight" } else { "number of edges" };
    let distance = match (p.directed, p.weighted) {
        (false, false) => "the distance between two vertices is the number of edges on a shortest path",
        (false, true) => "the distance between two vertices is the total weight of a lightest path",
        (true, false) => "the distance from u to v is the number of edges on a shortest path following edge directions",
        (true, true) => "the distance from u to v is the total weight of a lightest path following edge directions",
    };
    let pairs = if p.directed { "s*(s-1)" } else { "s*(s-1)/2" };
    match p.operator {
        MinimumDensitySubgraph => format!(
            "Among all sets of at least 2 vertices whose induced subgraph is connected, find one whose induced subgraph has the lowest density, where the density of a set of s vertices is the {size} inside the set divided by {pairs}."
        ),
        MaximumClique => "Find the largest set of vertices that are all pairwise adjacent.".into(),
        MaximumIndependentSet => "Find the largest set of vertices with no edges between them.".into(),
        MinimumVertexCover => "Find the smallest set of vertices such that every edge has at least one endpoint in the set.".into(),
        MaximumInducedBipartiteSubgraph => {
            "Find the largest set of vertices whose induced subgraph is bipartite (contains no odd cycle).".into()
        }
        MaximumAcyclicSubgraph => format!("Find the largest set of edges that contains no {cycle}."),
        DensestKSubgraph => format!(
            "Find a set of exactly {} vertices whose induced subgraph has the largest {size}.",
            p.k.unwrap_or(0)
        ),
        BalancedCut => "Split the vertices into two groups whose sizes differ by at most 1 so that the number of edges between the groups is as small as possible.".into(),
        FeedbackVertexSet => format!("Find the smallest set of vertices whose removal leaves a graph with no {cycle}."),
        FeedbackEdgeSet => format!("Find the smallest set of edges whose removal leaves a graph with no {cycle}."),
        LongestPath => format!(
            "Find a path that visits each vertex at most once{} and has the largest {size}.",
            if p.directed { ", follows edge directions" } else { "" }
        ),
        HamiltonianPath => format!(
            "Find a path that visits every vertex exactly once{}. If no such path exists, answer with an empty list.",
            if p.directed { " following edge directions" } else { "" }
        ),
        HamiltonianCycle => format!(
            "Find a cycle that visits every vertex exactly once and returns to its start{}. List each vertex once, in cycle order. If no such cycle exists, answer with an empty list.",
            if p.directed { ", following edge directions" } else { "" }
        ),
        GraphDiameter => format!("Compute the largest distance between any two vertices, where {distance}."),
        GraphRadius => format!(
            "Compute the smallest eccentricity over all vertices, where the eccentricity of a vertex is its largest distance to any other vertex and {distance}."
        ),
        GraphDensity => format!(
            "Compute the number of edges divided by the maximum possible number of edges, {} for n nodes. Give the value rounded to 3 decimal places.",
            if p.directed { "n*(n-1)" } else { "n*(n-1)/2" }
        ),
    }
}

fn answer_format(op: GraphOperator) -> &'static str {
    use GraphOperator::*;
    match op {
        MaximumAcyclicSubgraph | FeedbackEdgeSet => {
            "Give your final answer as a JSON object listing the edges, for example {\"answer\": [[0, 1], [2, 3]]}."
        }
        BalancedCut => "Give your final answer as a JSON object with the two groups, for example {\"answer\": [[0, 1, 2], [3, 4]]}.",
        LongestPath | HamiltonianPath | HamiltonianCycle => {
            "Give your final answer as a JSON object listing the vertices in order, for example {\"answer\": [0, 2, 1]}."
        }
        GraphDiameter | GraphRadius => "Give your final answer as a JSON object, for example {\"answer\": 3}.",
        GraphDensity => "Give your final answer as a JSON object, for example {\"answer\": 0.417}.",
        _ => "Give your final answer as a JSON object listing the vertices, for example {\"answer\": [0, 2, 3]}.",
    }
}

fn has_any_rule(op: GraphOperator) -> bool {
    use GraphOperator::*;
    !matches!(op, GraphDiameter | GraphRadius | GraphDensity)
}

/// Renders the canonical prompt for a graph problem.
pub fn render_graph_prompt(p: &GraphProblem) -> String {
    let name = title(p.operator, p.k);
    let kind = match (p.directed, p.weighted) {
        (false, false) => "an undirected graph",
        (false, true) => "a weighted undirected graph",
        (true, false) => "a directed graph",
        (true, true) => "a weighted directed graph",
    };
    let mut out = format!("Find the {name} of {kind} with {} nodes. {}", p.n_nodes, definition(p));
    if has_any_rule(p.operator) {
        let _ = write!(out, " If multiple {}s exist, return any one of them.", name);
    }
    out.push_str("\nGraph: Nodes: [");
    for v in 0..p.n_nodes {
        if v > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{v}");
    }
    out.push_str("]; Edges: [");
    for (i, e) in p.edges.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        if p.weighted {
            let _ = write!(out, "({},{},{})", e.u, e.v, e.w);
        } else {
            let _ = write!(out, "({},{})", e.u, e.v);
        }
    }
    out.push_str("].");
    match (p.directed, p.weighted) {
        (true, true) => out.push_str(" Each edge (u,v,w) points from u to v and has weight w."),
        (true, false) => out.push_str(" Each edge (u,v) points from u to v."),
        (false, true) => out.push_str(" Each edge (u,v,w) has weight w."),
        (false, false) => {}
    }
    out.push('\n');
    out.push_str(answer_format(p.operator));
    out
}
