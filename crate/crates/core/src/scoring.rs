//! Parse, verify and reward a completion against a dataset instance.
//!
//! This is the single scoring path shared by the CLI, the harness and the
//! service. It reads the stored ground truth and never re-runs a solver.

use serde::{Deserialize, Serialize};

use crate::graph::{solution_from_witness, verify_answer, Verdict};
use crate::parsing::{
    answer_json, format_number, match_value, normalize_with_fallback, parse_for, Completion, ExtractionStatus,
    Normalizer, ParsedAnswer,
};
use crate::rewards::{reward_counting, reward_graph_with, reward_spatial, RewardBreakdown, DEFAULT_LENGTH_THRESHOLD};
use crate::types::{ProblemInstance, ProblemSpec, TaskFamily};

#[derive(Clone, Copy)]
pub struct ScoreOptions<'a> {
    pub length_threshold: usize,
    /// Fallback for failed JSON extractions (graph and spatial only).
    pub normalizer: Option<&'a dyn Normalizer>,
}

impl Default for ScoreOptions<'_> {
    fn default() -> Self {
        ScoreOptions { length_threshold: DEFAULT_LENGTH_THRESHOLD, normalizer: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutcome {
    pub problem_id: String,
    pub family: TaskFamily,
    pub verdict: Verdict,
    pub parsed: ParsedAnswer,
    pub reward: RewardBreakdown,
    /// The normalizer was configured but could not be reached.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalizer_unavailable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl ScoreOutcome {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Correct
    }
}

/// Scores one completion.
pub fn score_completion(instance: &ProblemInstance, completion: &Completion, opts: &ScoreOptions) -> ScoreOutcome {
    let mut parsed = parse_for(instance.family, &instance.truth, completion);
    let mut normalizer_unavailable = false;
    if let (Some(normalizer), ExtractionStatus::ExtractionFailed, false) =
        (opts.normalizer, parsed.status, instance.family == TaskFamily::Counting)
    {
        match normalize_with_fallback(completion, &parsed, instance, normalizer) {
            Ok(p) => parsed = p,
            Err(_) => normalizer_unavailable = true,
        }
    }
    let (verdict, detail) = match &instance.spec {
        ProblemSpec::Graph(problem) => match solution_from_witness(problem, &instance.truth) {
            Ok(solution) => {
                let v = verify_answer(problem, &solution, &parsed);
                (v.verdict, Some(v.detail).filter(|d| !d.is_empty()))
            }
            Err(e) => (Verdict::Invalid, Some(format!("stored truth is inconsistent: {e}"))),
        },
        _ if !parsed.is_extracted() => (Verdict::Invalid, None),
        _ if match_value(&parsed, &instance.truth) => (Verdict::Correct, None),
        _ => (Verdict::Incorrect, None),
    };
    let correct = verdict == Verdict::Correct;
    let reward = match instance.family {
        TaskFamily::Counting => reward_counting(&parsed, correct),
        TaskFamily::Graph => reward_graph_with(&parsed, verdict, completion.text.chars().count(), opts.length_threshold),
        TaskFamily::Spatial => reward_spatial(&parsed, correct),
    };
    ScoreOutcome {
        problem_id: instance.id.clone(),
        family: instance.family,
        verdict,
        parsed,
        reward,
        normalizer_unavailable,
        detail,
    }
}

/// The best-formatted completion for an instance: the one a perfect model writes.
pub fn canonical_completion(instance: &ProblemInstance) -> String {
    match instance.family {
        TaskFamily::Counting => {
            format!("Answer: {}", format_number(&instance.truth).expect("counting truth is a scalar"))
        }
        TaskFamily::Graph | TaskFamily::Spatial => {
            format!("```json\n{}\n```", serde_json::json!({ "answer": answer_json(&instance.truth) }))
        }
    }
}
