//! Counting problems: an inclusive integer range pushed through an ordered
//! pipeline of filters and transforms, then reduced by one aggregate operator.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{seeded_rng, SeededRng};
use crate::types::{instance_id, ComplexityMeta, GroundTruth, ProblemInstance, ProblemSpec, TaskFamily};

pub const MAX_FILTERS: usize = 4;
pub const MAX_TRANSFORMS: usize = 3;
/// Rejection-sampling attempts allowed per generated instance.
pub const ATTEMPT_BUDGET: usize = 10_000;
/// Largest magnitude any intermediate value may reach in a generated spec.
pub const MAX_INTERMEDIATE: i64 = 1_000_000_000_000;
/// Largest accepted magnitude of a Product answer.
pub const MAX_PRODUCT: i64 = 1 << 62;
/// Hand-built specs may not span more integers than this.
pub const MAX_RANGE_LEN: i64 = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CountingError {
    #[error("range_lo {lo} exceeds range_hi {hi}")]
    EmptyRange { lo: i64, hi: i64 },
    #[error("range of {0} integers exceeds the supported maximum")]
    RangeTooLarge(i64),
    #[error("pipeline has {filters} filters and {transforms} transforms (need 1-4 filters, 0-3 transforms)")]
    PipelineShape { filters: usize, transforms: usize },
    #[error("constant out of range in step `{0}`")]
    BadConstant(String),
    #[error("no values remain before the final operation")]
    EmptyResult,
    #[error("bitwise operator applied to negative value {0}")]
    NegativeBitwise(i64),
    #[error("arithmetic overflow while evaluating the pipeline")]
    Overflow,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("exhausted the rejection budget of {ATTEMPT_BUDGET} attempts for instance {ordinal}")]
    GenerationBudget { ordinal: usize },
}

/// One pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PipelineStep {
    KeepEven,
    KeepOdd,
    KeepPositive,
    KeepNegative,
    KeepDivisibleBy { n: i64 },
    KeepBelow { t: i64 },
    KeepAbove { t: i64 },
    AddConstant { k: i64 },
    MultiplyConstant { k: i64 },
    Negate,
    Square,
    AbsoluteValue,
    ModuloConstant { m: i64 },
}

impl PipelineStep {
    pub fn is_filter(self) -> bool {
        matches!(
            self,
            PipelineStep::KeepEven
                | PipelineStep::KeepOdd
                | PipelineStep::KeepPositive
                | PipelineStep::KeepNegative
                | PipelineStep::KeepDivisibleBy { .. }
                | PipelineStep::KeepBelow { .. }
                | PipelineStep::KeepAbove { .. }
        )
    }

    fn check_constants(self) -> Result<(), CountingError> {
        let ok = match self {
            PipelineStep::KeepDivisibleBy { n } => (2..=12).contains(&n),
            PipelineStep::AddConstant { k } => (-20..=20).contains(&k) && k != 0,
            PipelineStep::MultiplyConstant { k } => (-20..=20).contains(&k) && k != 0,
            PipelineStep::ModuloConstant { m } => (2..=12).contains(&m),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(CountingError::BadConstant(format!("{self:?}")))
        }
    }

    /// Applies the step to `values`; transforms use checked arithmetic.
    pub fn apply(self, values: &[i64]) -> Result<Vec<i64>, CountingError> {
        use PipelineStep::*;
        let keep = |pred: &dyn Fn(i64) -> bool| values.iter().copied().filter(|&x| pred(x)).collect();
        let map = |f: &dyn Fn(i64) -> Option<i64>| -> Result<Vec<i64>, CountingError> {
            values.iter().map(|&x| f(x).ok_or(CountingError::Overflow)).collect()
        };
        Ok(match self {
            KeepEven => keep(&|x| x % 2 == 0),
            KeepOdd => keep(&|x| x % 2 != 0),
            KeepPositive => keep(&|x| x > 0),
            KeepNegative => keep(&|x| x < 0),
            KeepDivisibleBy { n } => keep(&|x| x % n == 0),
            KeepBelow { t } => keep(&|x| x < t),
            KeepAbove { t } => keep(&|x| x > t),
            AddConstant { k } => map(&|x| x.checked_add(k))?,
            MultiplyConstant { k } => map(&|x| x.checked_mul(k))?,
            Negate => map(&|x| x.checked_neg())?,
            Square => map(&|x| x.checked_mul(x))?,
            AbsoluteValue => map(&|x| x.checked_abs())?,
            ModuloConstant { m } => map(&|x| Some(x.rem_euclid(m)))?,
        })
    }

    fn sentence(self) -> String {
        use PipelineStep::*;
        match self {
            KeepEven => "keep only the numbers that are even.".into(),
            KeepOdd => "keep only the numbers that are odd.".into(),
            KeepPositive => "keep only the numbers that are positive (greater than 0).".into(),
            KeepNegative => "keep only the numbers that are negative (less than 0).".into(),
            KeepDivisibleBy { n } => format!("keep only the numbers that are divisible by {n}."),
            KeepBelow { t } => format!("keep only the numbers that are less than {t}."),
            KeepAbove { t } => format!("keep only the numbers that are greater than {t}."),
            AddConstant { k } if k < 0 => format!("subtract {} from each number.", -k),
            AddConstant { k } => format!("add {k} to each number."),
            MultiplyConstant { k } => format!("multiply each number by {k}."),
            Negate => "negate each number (multiply it by -1).".into(),
            Square => "replace each number with its square.".into(),
            AbsoluteValue => "replace each number with its absolute value.".into(),
            ModuloConstant { m } => format!(
                "replace each number with its remainder when divided by {m} (a value from 0 to {}).",
                m - 1
            ),
        }
    }
}

/// Final aggregation over the surviving multiset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AggregateOp {
    Count,
    UniqueCount,
    ZeroCount,
    EvenCount,
    OddCount,
    PositiveCount,
    NegativeCount,
    DivisibleByNCount { n: i64 },
    BelowThresholdCount { t: i64 },
    AboveThresholdCount { t: i64 },
    Sum,
    Product,
    Mean,
    Median,
    Mode,
    Min,
    Max,
    Range,
    BitwiseAnd,
    BitwiseOr,
    BitwiseXor,
    BitwiseNand,
}

/// Parameter-free name of an [`AggregateOp`], used for whitelists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateKind {
    Count,
    UniqueCount,
    ZeroCount,
    EvenCount,
    OddCount,
    PositiveCount,
    NegativeCount,
    DivisibleByNCount,
    BelowThresholdCount,
    AboveThresholdCount,
    Sum,
    Product,
    Mean,
    Median,
    Mode,
    Min,
    Max,
    Range,
    BitwiseAnd,
    BitwiseOr,
    BitwiseXor,
    BitwiseNand,
}

impl AggregateKind {
    pub const ALL: [AggregateKind; 22] = [
        AggregateKind::Count,
        AggregateKind::UniqueCount,
        AggregateKind::ZeroCount,
        AggregateKind::EvenCount,
        AggregateKind::OddCount,
        AggregateKind::PositiveCount,
        AggregateKind::NegativeCount,
        AggregateKind::DivisibleByNCount,
        AggregateKind::BelowThresholdCount,
        AggregateKind::AboveThresholdCount,
        AggregateKind::Sum,
        AggregateKind::Product,
        AggregateKind::Mean,
        AggregateKind::Median,
        AggregateKind::Mode,
        AggregateKind::Min,
        AggregateKind::Max,
        AggregateKind::Range,
        AggregateKind::BitwiseAnd,
        AggregateKind::BitwiseOr,
        AggregateKind::BitwiseXor,
        AggregateKind::BitwiseNand,
    ];

    pub fn is_bitwise(self) -> bool {
        matches!(
            self,
            AggregateKind::BitwiseAnd | AggregateKind::BitwiseOr | AggregateKind::BitwiseXor | AggregateKind::BitwiseNand
        )
    }
}

impl std::str::FromStr for AggregateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
            .map_err(|_| format!("unknown counting operator `{s}`"))
    }
}

impl AggregateOp {
    pub fn kind(self) -> AggregateKind {
        use AggregateOp as O;
        match self {
            O::Count => AggregateKind::Count,
            O::UniqueCount => AggregateKind::UniqueCount,
            O::ZeroCount => AggregateKind::ZeroCount,
            O::EvenCount => AggregateKind::EvenCount,
            O::OddCount => AggregateKind::OddCount,
            O::PositiveCount => AggregateKind::PositiveCount,
            O::NegativeCount => AggregateKind::NegativeCount,
            O::DivisibleByNCount { .. } => AggregateKind::DivisibleByNCount,
            O::BelowThresholdCount { .. } => AggregateKind::BelowThresholdCount,
            O::AboveThresholdCount { .. } => AggregateKind::AboveThresholdCount,
            O::Sum => AggregateKind::Sum,
            O::Product => AggregateKind::Product,
            O::Mean => AggregateKind::Mean,
            O::Median => AggregateKind::Median,
            O::Mode => AggregateKind::Mode,
            O::Min => AggregateKind::Min,
            O::Max => AggregateKind::Max,
            O::Range => AggregateKind::Range,
            O::BitwiseAnd => AggregateKind::BitwiseAnd,
            O::BitwiseOr => AggregateKind::BitwiseOr,
            O::BitwiseXor => AggregateKind::BitwiseXor,
            O::BitwiseNand => AggregateKind::BitwiseNand,
        }
    }

    fn sentence(self) -> String {
        use AggregateOp as O;
        match self {
            O::Count => "count how many values remain.".into(),
            O::UniqueCount => "count how many distinct values there are.".into(),
            O::ZeroCount => "count how many values are equal to 0.".into(),
            O::EvenCount => "count how many values are even.".into(),
            O::OddCount => "count how many values are odd.".into(),
            O::PositiveCount => "count how many values are positive (greater than 0).".into(),
            O::NegativeCount => "count how many values are negative (less than 0).".into(),
            O::DivisibleByNCount { n } => format!("count how many values are divisible by {n}."),
            O::BelowThresholdCount { t } => format!("count how many values are less than {t}."),
            O::AboveThresholdCount { t } => format!("count how many values are greater than {t}."),
            O::Sum => "compute the sum of all values.".into(),
            O::Product => "compute the product of all values.".into(),
            O::Mean => "compute the mean (average) of all values, rounded to two decimal places.".into(),
            O::Median => "compute the median of all values (for an even number of values, the mean of the two \
                          middle values), rounded to two decimal places."
                .into(),
            O::Mode => "find the mode, the value that occurs most often (if several values are tied, give the \
                        smallest of them)."
                .into(),
            O::Min => "find the smallest value.".into(),
            O::Max => "find the largest value.".into(),
            O::Range => "compute the range (the largest value minus the smallest value).".into(),
            O::BitwiseAnd => "compute the bitwise AND of all values.".into(),
            O::BitwiseOr => "compute the bitwise OR of all values.".into(),
            O::BitwiseXor => "compute the bitwise XOR of all values.".into(),
            O::BitwiseNand => "compute the bitwise NAND of all values, defined as the bitwise complement of their \
                               bitwise AND keeping only the lowest W bits, where W is the number of bits needed \
                               to write the largest value in binary (at least 1)."
                .into(),
        }
    }

    /// Reduces a non-empty multiset.
    pub fn aggregate(self, values: &[i64]) -> Result<GroundTruth, CountingError> {
        use AggregateOp as O;
        if values.is_empty() {
            return Err(CountingError::EmptyResult);
        }
        let count = |pred: &dyn Fn(i64) -> bool| GroundTruth::Int {
            value: values.iter().filter(|&&x| pred(x)).count() as i64,
        };
        let int = |value: i64| GroundTruth::Int { value };
        let min = *values.iter().min().expect("non-empty");
        let max = *values.iter().max().expect("non-empty");
        if self.kind().is_bitwise() && min < 0 {
            return Err(CountingError::NegativeBitwise(min));
        }
        Ok(match self {
            O::Count => int(values.len() as i64),
            O::UniqueCount => int(values.iter().collect::<HashSet<_>>().len() as i64),
            O::ZeroCount => count(&|x| x == 0),
            O::EvenCount => count(&|x| x % 2 == 0),
            O::OddCount => count(&|x| x % 2 != 0),
            O::PositiveCount => count(&|x| x > 0),
            O::NegativeCount => count(&|x| x < 0),
            O::DivisibleByNCount { n } => count(&|x| x % n == 0),
            O::BelowThresholdCount { t } => count(&|x| x < t),
            O::AboveThresholdCount { t } => count(&|x| x > t),
            O::Sum => int(values.iter().try_fold(0i64, |acc, &x| acc.checked_add(x)).ok_or(CountingError::Overflow)?),
            O::Product => {
                let p = values
                    .iter()
                    .try_fold(1i64, |acc, &x| acc.checked_mul(x).filter(|p| p.unsigned_abs() <= MAX_PRODUCT as u64))
                    .ok_or(CountingError::Overflow)?;
                int(p)
            }
            O::Mean => {
                let sum: i128 = values.iter().map(|&x| x as i128).sum();
                hundredths(round_half_away(sum * 100, values.len() as i128))
            }
            O::Median => {
                let mut sorted = values.to_vec();
                sorted.sort_unstable();
                let mid = sorted.len() / 2;
                let centi = if sorted.len() % 2 == 1 {
                    sorted[mid] as i128 * 100
                } else {
                    (sorted[mid - 1] as i128 + sorted[mid] as i128) * 50
                };
                hundredths(centi)
            }
            O::Mode => {
                let mut freq: BTreeMap<i64, usize> = BTreeMap::new();
                for &x in values {
                    *freq.entry(x).or_default() += 1;
                }
                let best = freq.values().copied().max().expect("non-empty");
                // BTreeMap iterates ascending, so the first hit is the smallest tied value.
                int(*freq.iter().find(|(_, &c)| c == best).expect("non-empty").0)
            }
            O::Min => int(min),
            O::Max => int(max),
            O::Range => int(max.checked_sub(min).ok_or(CountingError::Overflow)?),
            O::BitwiseAnd => int(values.iter().fold(-1i64, |acc, &x| acc & x)),
            O::BitwiseOr => int(values.iter().fold(0i64, |acc, &x| acc | x)),
            O::BitwiseXor => int(values.iter().fold(0i64, |acc, &x| acc ^ x)),
            O::BitwiseNand => {
                let and = values.iter().fold(-1i64, |acc, &x| acc & x);
                let width = (64 - max.leading_zeros()).max(1);
                let mask = if width >= 63 { i64::MAX } else { (1i64 << width) - 1 };
                int(!and & mask)
            }
        })
    }
}

fn round_half_away(num: i128, den: i128) -> i128 {
    let q = (2 * num.abs() + den) / (2 * den);
    if num < 0 {
        -q
    } else {
        q
    }
}

fn hundredths(centi: i128) -> GroundTruth {
    GroundTruth::Real { value: centi as f64 / 100.0, decimals: 2 }
}

/// A counting task.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountingSpec {
    pub range_lo: i64,
    pub range_hi: i64,
    pub pipeline: Vec<PipelineStep>,
    pub final_op: AggregateOp,
}

impl CountingSpec {
    pub fn n_filters(&self) -> usize {
        self.pipeline.iter().filter(|s| s.is_filter()).count()
    }

    pub fn n_transforms(&self) -> usize {
        self.pipeline.len() - self.n_filters()
    }

    /// Structural invariants; emptiness and sign constraints surface from [`evaluate_counting`].
    pub fn validate(&self) -> Result<(), CountingError> {
        if self.range_lo > self.range_hi {
            return Err(CountingError::EmptyRange { lo: self.range_lo, hi: self.range_hi });
        }
        let len = self.range_hi as i128 - self.range_lo as i128 + 1;
        if len > MAX_RANGE_LEN as i128 {
            return Err(CountingError::RangeTooLarge(len.min(i64::MAX as i128) as i64));
        }
        let (filters, transforms) = (self.n_filters(), self.n_transforms());
        if !(1..=MAX_FILTERS).contains(&filters) || transforms > MAX_TRANSFORMS {
            return Err(CountingError::PipelineShape { filters, transforms });
        }
        for step in &self.pipeline {
            step.check_constants()?;
        }
        match self.final_op {
            AggregateOp::DivisibleByNCount { n } if !(2..=12).contains(&n) => {
                Err(CountingError::BadConstant(format!("{:?}", self.final_op)))
            }
            _ => Ok(()),
        }
    }

    /// The multiset reaching the final operator.
    pub fn final_stage(&self) -> Result<Vec<i64>, CountingError> {
        let mut values: Vec<i64> = (self.range_lo..=self.range_hi).collect();
        for step in &self.pipeline {
            values = step.apply(&values)?;
        }
        Ok(values)
    }
}

impl fmt::Display for CountingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_counting_prompt(self))
    }
}

/// Computes the ground truth by running the pipeline left to right.
pub fn evaluate_counting(spec: &CountingSpec) -> Result<GroundTruth, CountingError> {
    spec.validate()?;
    let values = spec.final_stage()?;
    spec.final_op.aggregate(&values)
}

pub const COUNTING_ANSWER_INSTRUCTION: &str = "Provide your final answer as 'Answer: X'.";

/// Renders the canonical prompt for a spec.
pub fn render_counting_prompt(spec: &CountingSpec) -> String {
    let mut out = format!("Consider the integers from {} to {}, inclusive.", spec.range_lo, spec.range_hi);
    for (i, step) in spec.pipeline.iter().enumerate() {
        out.push_str(if i == 0 { " First, " } else { " Then, " });
        out.push_str(&step.sentence());
    }
    out.push_str(" Of these numbers, ");
    out.push_str(&spec.final_op.sentence());
    out.push_str(" Show your reasoning in at most 5 short steps, one per line, then give the final answer on its own line. ");
    out.push_str(COUNTING_ANSWER_INSTRUCTION);
    out
}

pub fn complexity(spec: &CountingSpec) -> ComplexityMeta {
    ComplexityMeta::Counting {
        range_scale: spec.range_hi - spec.range_lo + 1,
        n_filters: spec.n_filters(),
        n_transforms: spec.n_transforms(),
        total_steps: spec.pipeline.len(),
    }
}

/// Builds a dataset instance from a hand-pinned spec.
pub fn instance_from_spec(spec: CountingSpec, seed: u64, ordinal: usize) -> Result<ProblemInstance, CountingError> {
    let truth = evaluate_counting(&spec)?;
    Ok(ProblemInstance {
        id: instance_id(TaskFamily::Counting, seed, ordinal),
        family: TaskFamily::Counting,
        prompt: render_counting_prompt(&spec),
        complexity: complexity(&spec),
        spec: ProblemSpec::Counting(spec),
        truth,
        seed,
    })
}

/// Generator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingConfig {
    pub count: usize,
    /// Inclusive bounds on the number of integers in the starting range.
    pub range_scale_bounds: (i64, i64),
    pub filter_bounds: (usize, usize),
    pub transform_bounds: (usize, usize),
    pub operator_whitelist: Vec<AggregateKind>,
    pub seed: u64,
}

impl Default for CountingConfig {
    fn default() -> Self {
        Self {
            count: 100,
            range_scale_bounds: (10, 10_000),
            filter_bounds: (1, MAX_FILTERS),
            transform_bounds: (0, MAX_TRANSFORMS),
            operator_whitelist: AggregateKind::ALL.to_vec(),
            seed: 0,
        }
    }
}

impl CountingConfig {
    pub fn validate(&self) -> Result<(), CountingError> {
        let (smin, smax) = self.range_scale_bounds;
        if smin < 1 || smin > smax || smax > MAX_RANGE_LEN {
            return Err(CountingError::Config(format!(
                "range_scale_bounds ({smin}, {smax}) must satisfy 1 <= min <= max <= {MAX_RANGE_LEN}"
            )));
        }
        let (fmin, fmax) = self.filter_bounds;
        if fmin < 1 || fmin > fmax || fmax > MAX_FILTERS {
            return Err(CountingError::Config(format!("filter_bounds ({fmin}, {fmax}) must lie within 1..=4")));
        }
        let (tmin, tmax) = self.transform_bounds;
        if tmin > tmax || tmax > MAX_TRANSFORMS {
            return Err(CountingError::Config(format!("transform_bounds ({tmin}, {tmax}) must lie within 0..=3")));
        }
        if self.operator_whitelist.is_empty() {
            return Err(CountingError::Config("operator whitelist is empty".into()));
        }
        Ok(())
    }
}

/// Generates `config.count` distinct counting instances.
pub fn generate_counting(config: &CountingConfig) -> Result<Vec<ProblemInstance>, CountingError> {
    config.validate()?;
    let mut rng = seeded_rng(config.seed);
    let mut seen: HashSet<CountingSpec> = HashSet::with_capacity(config.count);
    let mut out = Vec::with_capacity(config.count);
    for ordinal in 0..config.count {
        let mut attempt = 0;
        let spec = loop {
            if attempt == ATTEMPT_BUDGET {
                return Err(CountingError::GenerationBudget { ordinal });
            }
            attempt += 1;
            if let Some(spec) = draw_spec(config, &mut rng) {
                if !seen.contains(&spec) {
                    break spec;
                }
            }
        };
        seen.insert(spec.clone());
        out.push(instance_from_spec(spec, config.seed, ordinal)?);
    }
    Ok(out)
}

/// Draws a span whose decade is uniform over the decades touching the bounds.
fn draw_span(rng: &mut SeededRng, (lo, hi): (i64, i64)) -> i64 {
    let mut decades = Vec::new();
    let mut start = 1i64;
    while start <= hi {
        let end = start.saturating_mul(10) - 1;
        let (a, b) = (start.max(lo), end.min(hi));
        if a <= b {
            decades.push((a, b));
        }
        start = start.saturating_mul(10);
    }
    let (a, b) = decades[rng.gen_range(0..decades.len())];
    rng.gen_range(a..=b)
}

fn bounds(values: &[i64]) -> (i64, i64) {
    let min = *values.iter().min().expect("non-empty");
    let max = *values.iter().max().expect("non-empty");
    (min, max)
}

fn draw_step(rng: &mut SeededRng, filter: bool, values: &[i64]) -> PipelineStep {
    let (min, max) = bounds(values);
    if filter {
        match rng.gen_range(0..7) {
            0 => PipelineStep::KeepEven,
            1 => PipelineStep::KeepOdd,
            2 => PipelineStep::KeepPositive,
            3 => PipelineStep::KeepNegative,
            4 => PipelineStep::KeepDivisibleBy { n: rng.gen_range(2..=12) },
            5 => PipelineStep::KeepBelow { t: rng.gen_range(min..=max) },
            _ => PipelineStep::KeepAbove { t: rng.gen_range(min..=max) },
        }
    } else {
        let nonzero = |rng: &mut SeededRng| {
            let k = rng.gen_range(-20..=19);
            if k >= 0 {
                k + 1
            } else {
                k
            }
        };
        match rng.gen_range(0..6) {
            0 => PipelineStep::AddConstant { k: nonzero(rng) },
            1 => PipelineStep::MultiplyConstant { k: nonzero(rng) },
            2 => PipelineStep::Negate,
            3 => PipelineStep::Square,
            4 => PipelineStep::AbsoluteValue,
            _ => PipelineStep::ModuloConstant { m: rng.gen_range(2..=12) },
        }
    }
}

fn draw_final(rng: &mut SeededRng, kind: AggregateKind, values: &[i64]) -> AggregateOp {
    let (min, max) = bounds(values);
    use AggregateKind as K;
    match kind {
        K::Count => AggregateOp::Count,
        K::UniqueCount => AggregateOp::UniqueCount,
        K::ZeroCount => AggregateOp::ZeroCount,
        K::EvenCount => AggregateOp::EvenCount,
        K::OddCount => AggregateOp::OddCount,
        K::PositiveCount => AggregateOp::PositiveCount,
        K::NegativeCount => AggregateOp::NegativeCount,
        K::DivisibleByNCount => AggregateOp::DivisibleByNCount { n: rng.gen_range(2..=12) },
        K::BelowThresholdCount => AggregateOp::BelowThresholdCount { t: rng.gen_range(min..=max) },
        K::AboveThresholdCount => AggregateOp::AboveThresholdCount { t: rng.gen_range(min..=max) },
        K::Sum => AggregateOp::Sum,
        K::Product => AggregateOp::Product,
        K::Mean => AggregateOp::Mean,
        K::Median => AggregateOp::Median,
        K::Mode => AggregateOp::Mode,
        K::Min => AggregateOp::Min,
        K::Max => AggregateOp::Max,
        K::Range => AggregateOp::Range,
        K::BitwiseAnd => AggregateOp::BitwiseAnd,
        K::BitwiseOr => AggregateOp::BitwiseOr,
        K::BitwiseXor => AggregateOp::BitwiseXor,
        K::BitwiseNand => AggregateOp::BitwiseNand,
    }
}

/// One rejection-sampling attempt; `None` means "draw again".
fn draw_spec(config: &CountingConfig, rng: &mut SeededRng) -> Option<CountingSpec> {
    let span = draw_span(rng, config.range_scale_bounds);
    let range_lo = if rng.gen_bool(0.5) { 1 } else { rng.gen_range(-span..=span) };
    let range_hi = range_lo + span - 1;
    let n_filters = rng.gen_range(config.filter_bounds.0..=config.filter_bounds.1);
    let n_transforms = rng.gen_range(config.transform_bounds.0..=config.transform_bounds.1);
    let mut kinds: Vec<bool> = std::iter::repeat(true)
        .take(n_filters)
        .chain(std::iter::repeat(false).take(n_transforms))
        .collect();
    kinds.shuffle(rng);

    let mut values: Vec<i64> = (range_lo..=range_hi).collect();
    let mut pipeline = Vec::with_capacity(kinds.len());
    for filter in kinds {
        let step = draw_step(rng, filter, &values);
        values = step.apply(&values).ok()?;
        if values.is_empty() || values.iter().any(|v| v.unsigned_abs() > MAX_INTERMEDIATE as u64) {
            return None;
        }
        pipeline.push(step);
    }
    let kind = config.operator_whitelist[rng.gen_range(0..config.operator_whitelist.len())];
    let final_op = draw_final(rng, kind, &values);
    let spec = CountingSpec { range_lo, range_hi, pipeline, final_op };
    // Rejects negative bitwise inputs and oversized products.
    final_op.aggregate(&values).ok()?;
    Some(spec)
}
