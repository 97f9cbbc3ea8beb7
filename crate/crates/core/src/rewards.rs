//! Task-specific reward functions.
//!
//! Components are computed in integer hundredths and converted once, so
//! `total` is always the exact sum of the components as printed
//! (1.1, not 1.1000000000000001).

use serde::{Deserialize, Serialize};

use crate::graph::Verdict;
use crate::parsing::{ExtractionStatus, FormatClass, ParsedAnswer};
use crate::types::TaskFamily;

/// Completions longer than this many characters get the graph length penalty.
pub const DEFAULT_LENGTH_THRESHOLD: usize = 8_192;
/// Counting answers may use this many reasoning steps without penalty.
pub const FREE_STEPS: u32 = 5;

/// Reward bounds per family, as (min, max).
pub fn reward_bounds(family: TaskFamily) -> (f64, f64) {
    match family {
        TaskFamily::Counting => (-0.4, 1.1),
        TaskFamily::Graph => (-0.2, 1.1),
        TaskFamily::Spatial => (0.0, 1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TelemetryCategory {
    CorrectWellFormatted,
    CorrectOtherFormat,
    IncorrectWellFormatted,
    ExtractionFailure,
    Cutoff,
}

impl TelemetryCategory {
    pub const ALL: [TelemetryCategory; 5] = [
        TelemetryCategory::CorrectWellFormatted,
        TelemetryCategory::CorrectOtherFormat,
        TelemetryCategory::IncorrectWellFormatted,
        TelemetryCategory::ExtractionFailure,
        TelemetryCategory::Cutoff,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TelemetryCategory::CorrectWellFormatted => "CorrectWellFormatted",
            TelemetryCategory::CorrectOtherFormat => "CorrectOtherFormat",
            TelemetryCategory::IncorrectWellFormatted => "IncorrectWellFormatted",
            TelemetryCategory::ExtractionFailure => "ExtractionFailure",
            TelemetryCategory::Cutoff => "Cutoff",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub correctness: f64,
    pub format_bonus: f64,
    pub step_penalty: f64,
    pub length_penalty: f64,
    pub total: f64,
    pub category: TelemetryCategory,
}

impl RewardBreakdown {
    fn from_hundredths(correctness: i32, format: i32, step: i32, length: i32, category: TelemetryCategory) -> Self {
        let h = |x: i32| f64::from(x) / 100.0;
        RewardBreakdown {
            correctness: h(correctness),
            format_bonus: h(format),
            step_penalty: h(step),
            length_penalty: h(length),
            total: h(correctness + format + step + length),
            category,
        }
    }
}

fn well_formatted(class: FormatClass) -> bool {
    matches!(class, FormatClass::CanonicalAnswerLine | FormatClass::JsonObject | FormatClass::JsonCodeBlock)
}

/// Telemetry bucket for one completion.
///
/// Extracted-but-wrong answers all land in `IncorrectWellFormatted`: the
/// category set has no separate bucket for wrong answers in other formats.
pub fn categorize(parsed: &ParsedAnswer, correct: bool) -> TelemetryCategory {
    match parsed.status {
        ExtractionStatus::Truncated => TelemetryCategory::Cutoff,
        ExtractionStatus::ExtractionFailed => TelemetryCategory::ExtractionFailure,
        ExtractionStatus::Extracted if !correct => TelemetryCategory::IncorrectWellFormatted,
        ExtractionStatus::Extracted if well_formatted(parsed.format_class) => TelemetryCategory::CorrectWellFormatted,
        ExtractionStatus::Extracted => TelemetryCategory::CorrectOtherFormat,
    }
}

pub fn reward_counting(parsed: &ParsedAnswer, correct: bool) -> RewardBreakdown {
    let correct = correct && parsed.is_extracted();
    let format = match (parsed.status, parsed.format_class) {
        (ExtractionStatus::Extracted, FormatClass::CanonicalAnswerLine) => 10,
        (ExtractionStatus::Extracted, FormatClass::Invalid) => -10,
        (ExtractionStatus::Extracted, _) => 5,
        _ => -10,
    };
    let over = parsed.step_count.saturating_sub(FREE_STEPS).min(3) as i32;
    RewardBreakdown::from_hundredths(if correct { 100 } else { 0 }, format, -10 * over, 0, categorize(parsed, correct))
}

pub fn reward_graph(parsed: &ParsedAnswer, verdict: Verdict, completion_length: usize) -> RewardBreakdown {
    reward_graph_with(parsed, verdict, completion_length, DEFAULT_LENGTH_THRESHOLD)
}

/// Graph reward with an explicit length threshold.
pub fn reward_graph_with(
    parsed: &ParsedAnswer,
    verdict: Verdict,
    completion_length: usize,
    length_threshold: usize,
) -> RewardBreakdown {
    let correct = verdict == Verdict::Correct && parsed.is_extracted();
    let category = categorize(parsed, correct);
    if completion_length > length_threshold || parsed.status == ExtractionStatus::Truncated {
        return RewardBreakdown::from_hundredths(0, 0, 0, -20, category);
    }
    if parsed.status == ExtractionStatus::ExtractionFailed {
        return RewardBreakdown::from_hundredths(0, -20, 0, 0, category);
    }
    let format = if well_formatted(parsed.format_class) { 10 } else { 0 };
    RewardBreakdown::from_hundredths(if correct { 100 } else { 0 }, format, 0, 0, category)
}

pub fn reward_spatial(parsed: &ParsedAnswer, correct: bool) -> RewardBreakdown {
    let correct = correct && parsed.is_extracted();
    RewardBreakdown::from_hundredths(if correct { 100 } else { 0 }, 0, 0, 0, categorize(parsed, correct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::GroundTruth;

    fn parsed(status: ExtractionStatus, class: FormatClass, steps: u32) -> ParsedAnswer {
        ParsedAnswer {
            status,
            value: (status == ExtractionStatus::Extracted).then_some(GroundTruth::Int { value: 1 }),
            format_class: class,
            step_count: steps,
        }
    }

    use ExtractionStatus::*;
    use FormatClass::*;

    #[test]
    fn counting_examples() {
        assert_eq!(reward_counting(&parsed(Extracted, CanonicalAnswerLine, 3), true).total, 1.1);
        assert_eq!(reward_counting(&parsed(ExtractionFailed, Invalid, 9), false).total, -0.4);
        assert_eq!(reward_counting(&parsed(Extracted, AcceptableVariant, 7), true).total, 0.85);
    }

    #[test]
    fn step_cap() {
        let a = reward_counting(&parsed(Extracted, BareValue, 8), false);
        let b = reward_counting(&parsed(Extracted, BareValue, 800), false);
        assert_eq!(a.step_penalty, -0.3);
        assert_eq!(a, b);
    }

    #[test]
    fn graph_examples() {
        assert_eq!(reward_graph(&parsed(Extracted, JsonCodeBlock, 0), Verdict::Correct, 100).total, 1.1);
        assert_eq!(reward_graph(&parsed(Extracted, JsonObject, 0), Verdict::Incorrect, 100).total, 0.1);
        assert_eq!(reward_graph(&parsed(Extracted, BareValue, 0), Verdict::Correct, 100).total, 1.0);
        assert_eq!(reward_graph(&parsed(ExtractionFailed, Invalid, 0), Verdict::Invalid, 12_000).total, -0.2);
        assert_eq!(reward_graph(&parsed(Extracted, JsonObject, 0), Verdict::Correct, 9_000).total, -0.2);
    }

    #[test]
    fn spatial_grid() {
        for status in [Extracted, ExtractionFailed, Truncated] {
            for class in FormatClass::ALL {
                for correct in [false, true] {
                    let r = reward_spatial(&parsed(status, class, 4), correct);
                    let want = if status == Extracted && correct { 1.0 } else { 0.0 };
                    assert_eq!(r.total, want);
                    assert_eq!(r.format_bonus + r.step_penalty + r.length_penalty, 0.0);
                }
            }
        }
    }

    #[test]
    fn categories() {
        assert_eq!(categorize(&parsed(Truncated, Invalid, 0), false), TelemetryCategory::Cutoff);
        assert_eq!(categorize(&parsed(Extracted, CanonicalAnswerLine, 0), true), TelemetryCategory::CorrectWellFormatted);
        assert_eq!(categorize(&parsed(Extracted, JsonObject, 0), false), TelemetryCategory::IncorrectWellFormatted);
        assert_eq!(categorize(&parsed(Extracted, BareValue, 0), true), TelemetryCategory::CorrectOtherFormat);
    }
}
