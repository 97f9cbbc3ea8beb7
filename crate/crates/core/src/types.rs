//! Domain types shared by every task family.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::counting::CountingSpec;
use crate::graph::GraphProblem;
use crate::spatial::{Cardinal, QueryKind, RelativeTurn, SpatialProblem};

/// The three procedurally generated task families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskFamily {
    Counting,
    Graph,
    Spatial,
}

impl TaskFamily {
    pub const ALL: [TaskFamily; 3] = [TaskFamily::Counting, TaskFamily::Graph, TaskFamily::Spatial];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskFamily::Counting => "counting",
            TaskFamily::Graph => "graph",
            TaskFamily::Spatial => "spatial",
        }
    }
}

impl fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "counting" => Ok(TaskFamily::Counting),
            "graph" => Ok(TaskFamily::Graph),
            "spatial" => Ok(TaskFamily::Spatial),
            other => Err(format!("unknown task family `{other}` (expected counting, graph or spatial)")),
        }
    }
}

/// Calibrated difficulty tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifficultyTier {
    Easy,
    Medium,
    Hard,
}

impl DifficultyTier {
    pub const ALL: [DifficultyTier; 3] = [DifficultyTier::Easy, DifficultyTier::Medium, DifficultyTier::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            DifficultyTier::Easy => "easy",
            DifficultyTier::Medium => "medium",
            DifficultyTier::Hard => "hard",
        }
    }
}

/// A family-tagged verifiable answer.
///
/// Graph answers use node ids in the order the solver (or the model) produced
/// them; comparisons that need set semantics live in the matchers, not here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GroundTruth {
    Int { value: i64 },
    /// A decimal answer, `decimals` is the precision it is rendered at.
    Real { value: f64, decimals: u8 },
    VertexSet { nodes: Vec<usize> },
    EdgeSet { edges: Vec<(usize, usize)> },
    NodeSequence { nodes: Vec<usize> },
    Partition { parts: (Vec<usize>, Vec<usize>) },
    Coordinate { x: f64, y: f64 },
    Orientation { value: Cardinal },
    RelativeOrientation { value: RelativeTurn },
}

impl GroundTruth {
    /// Short shape name, used in diagnostics.
    pub fn shape_name(&self) -> &'static str {
        match self {
            GroundTruth::Int { .. } => "int",
            GroundTruth::Real { .. } => "real",
            GroundTruth::VertexSet { .. } => "vertex_set",
            GroundTruth::EdgeSet { .. } => "edge_set",
            GroundTruth::NodeSequence { .. } => "node_sequence",
            GroundTruth::Partition { .. } => "partition",
            GroundTruth::Coordinate { .. } => "coordinate",
            GroundTruth::Orientation { .. } => "orientation",
            GroundTruth::RelativeOrientation { .. } => "relative_orientation",
        }
    }

    /// Numeric view of scalar answers.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            GroundTruth::Int { value } => Some(value as f64),
            GroundTruth::Real { value, .. } => Some(value),
            _ => None,
        }
    }
}

/// Complexity knobs recorded alongside each instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComplexityMeta {
    Counting {
        range_scale: i64,
        n_filters: usize,
        n_transforms: usize,
        total_steps: usize,
    },
    Graph {
        n_nodes: usize,
        n_edges: usize,
        directed: bool,
        weighted: bool,
    },
    Spatial {
        n_actions: usize,
        query_kind: QueryKind,
    },
}

/// Family-specific problem payload, serialized under `"spec"` with a `kind` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProblemSpec {
    Counting(CountingSpec),
    Graph(GraphProblem),
    Spatial(SpatialProblem),
}

impl ProblemSpec {
    pub fn family(&self) -> TaskFamily {
        match self {
            ProblemSpec::Counting(_) => TaskFamily::Counting,
            ProblemSpec::Graph(_) => TaskFamily::Graph,
            ProblemSpec::Spatial(_) => TaskFamily::Spatial,
        }
    }
}

/// One generated task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub id: String,
    pub family: TaskFamily,
    pub prompt: String,
    pub spec: ProblemSpec,
    pub truth: GroundTruth,
    pub complexity: ComplexityMeta,
    pub seed: u64,
}

/// Dataset identifier: `{family}-{seed}-{ordinal}`.
pub fn instance_id(family: TaskFamily, seed: u64, ordinal: usize) -> String {
    format!("{family}-{seed}-{ordinal}")
}

/// `x * 10^decimals` rounded half away from zero, as an integer key for
/// fixed-precision comparisons.
pub fn scaled_round(x: f64, decimals: u32) -> i64 {
    let scaled = x * 10f64.powi(decimals as i32);
    // Absorb representation error such as 2.0004999... vs 2.0005.
    let nudged = scaled + scaled.signum() * 1e-9 * scaled.abs().max(1.0);
    nudged.round() as i64
}

/// `x` rounded half away from zero to `decimals` places.
pub fn round_half_away(x: f64, decimals: u32) -> f64 {
    scaled_round(x, decimals) as f64 / 10f64.powi(decimals as i32)
}
