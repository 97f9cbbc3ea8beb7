//! Answer extraction from raw model completions.
//!
//! Counting answers come from an `Answer: X` line (or a small table of
//! variants); graph and spatial answers come from JSON. Extraction never
//! fails hard: every outcome is a [`ParsedAnswer`] with a status tag.

use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::spatial::{Cardinal, RelativeTurn};
use crate::types::{scaled_round, GroundTruth, ProblemInstance, TaskFamily};

/// Env var holding the normalizer credential.
pub const NORMALIZER_KEY_ENV: &str = "RLVR_NORMALIZER_API_KEY";
pub const NORMALIZER_TIMEOUT: Duration = Duration::from_secs(30);
/// Decimal places used when comparing real-valued answers.
pub const MATCH_DECIMALS: u32 = 3;

/// A raw model output.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    /// Generation stopped at the token limit.
    #[serde(default)]
    pub truncated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem_id: Option<String>,
}

impl Completion {
    pub fn new(text: impl Into<String>) -> Self {
        Completion { text: text.into(), ..Completion::default() }
    }

    pub fn truncated(text: impl Into<String>) -> Self {
        Completion { text: text.into(), truncated: true, ..Completion::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStatus {
    Extracted,
    ExtractionFailed,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatClass {
    CanonicalAnswerLine,
    AcceptableVariant,
    JsonObject,
    JsonCodeBlock,
    BareValue,
    Invalid,
}

impl FormatClass {
    pub const ALL: [FormatClass; 6] = [
        FormatClass::CanonicalAnswerLine,
        FormatClass::AcceptableVariant,
        FormatClass::JsonObject,
        FormatClass::JsonCodeBlock,
        FormatClass::BareValue,
        FormatClass::Invalid,
    ];
}

/// Result of extracting an answer. `value` is present iff `status` is `Extracted`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub status: ExtractionStatus,
    pub value: Option<GroundTruth>,
    pub format_class: FormatClass,
    pub step_count: u32,
}

impl ParsedAnswer {
    pub fn extracted(value: GroundTruth, format_class: FormatClass, step_count: u32) -> Self {
        ParsedAnswer { status: ExtractionStatus::Extracted, value: Some(value), format_class, step_count }
    }

    /// A failure: `Truncated` when the completion was cut off, else `ExtractionFailed`.
    pub fn failed(truncated: bool, step_count: u32) -> Self {
        ParsedAnswer {
            status: if truncated { ExtractionStatus::Truncated } else { ExtractionStatus::ExtractionFailed },
            value: None,
            format_class: FormatClass::Invalid,
            step_count,
        }
    }

    pub fn is_extracted(&self) -> bool {
        self.status == ExtractionStatus::Extracted
    }
}

/// The answer schema a family/operator expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerShape {
    Number,
    VertexSet,
    EdgeSet,
    NodeSequence,
    Partition,
    Coordinate,
    Orientation,
    RelativeOrientation,
}

impl AnswerShape {
    pub fn of(truth: &GroundTruth) -> Self {
        match truth {
            GroundTruth::Int { .. } | GroundTruth::Real { .. } => AnswerShape::Number,
            GroundTruth::VertexSet { .. } => AnswerShape::VertexSet,
            GroundTruth::EdgeSet { .. } => AnswerShape::EdgeSet,
            GroundTruth::NodeSequence { .. } => AnswerShape::NodeSequence,
            GroundTruth::Partition { .. } => AnswerShape::Partition,
            GroundTruth::Coordinate { .. } => AnswerShape::Coordinate,
            GroundTruth::Orientation { .. } => AnswerShape::Orientation,
            GroundTruth::RelativeOrientation { .. } => AnswerShape::RelativeOrientation,
        }
    }
}

// ---------------------------------------------------------------------------
// Numbers

const NUM: &str = r"[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?";

static NUM_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(NUM).expect("valid regex"));

/// Parses an integer or decimal literal (thousands separators allowed).
pub fn parse_number(text: &str) -> Option<GroundTruth> {
    let t = text.trim().replace(',', "");
    let t = t.strip_prefix('+').unwrap_or(&t);
    if t.is_empty() {
        return None;
    }
    if let Some((_, frac)) = t.split_once('.') {
        let value: f64 = t.parse().ok()?;
        value.is_finite().then_some(GroundTruth::Real { value, decimals: frac.len().min(255) as u8 })
    } else {
        t.parse::<i64>().ok().map(|value| GroundTruth::Int { value })
    }
}

// ---------------------------------------------------------------------------
// Counting

static CANONICAL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"^\s*Answer:\s*({NUM})\s*$")).expect("valid regex"));

/// Accepted non-canonical answer lines, checked in order on each line.
static VARIANT_RES: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        // **Answer:** 16, **Answer: 16**
        format!(r"^\s*\*\*\s*(?:Final\s+)?Answer\s*:?\s*\*\*\s*:?\s*\**\s*({NUM})\s*\**\s*\.?\s*$"),
        format!(r"(?i)^\s*\**\s*(?:Final\s+)?Answer\s*:?\s*({NUM})\s*\**\s*\.?\s*\**\s*$"),
        // Answer: 16. / answer: 16 / Final Answer: 16 / Answer = 16
        format!(r"(?i)^\s*(?:final\s+)?answer\s*[:=]\s*\**\s*({NUM})\s*\**\s*\.?\s*$"),
        // The answer is 16 / The final answer is: **16**
        format!(r"(?i)\bthe\s+(?:final\s+)?answer\s+is\s*:?\s*\**\s*({NUM})(?:\s|\*|\.|$)"),
        format!(r"\\boxed\{{\s*({NUM})\s*\}}"),
    ]
    .iter()
    .map(|p| Regex::new(p).expect("valid regex"))
    .collect()
});

static BARE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(&format!(r"^\s*({NUM})\s*\.?\s*$")).expect("valid regex"));

static ENUMERATED_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?mi)^\s*(?:step\s*\d+|\d+[.)])(?:\s|:|$)").expect("valid regex"));

/// Reasoning steps before `answer_line`: the larger of the non-empty line
/// count and the enumerated-item count.
pub fn count_steps(lines: &[&str]) -> u32 {
    let non_empty = lines.iter().filter(|l| !l.trim().is_empty()).count();
    let enumerated = lines.iter().filter(|l| ENUMERATED_RE.is_match(l)).count();
    non_empty.max(enumerated).min(u32::MAX as usize) as u32
}

/// Extracts a counting answer.
pub fn parse_counting(completion: &Completion) -> ParsedAnswer {
    let lines: Vec<&str> = completion.text.lines().collect();
    let found = (|| {
        if let Some(i) = lines.iter().rposition(|l| CANONICAL_RE.is_match(l)) {
            let caps = CANONICAL_RE.captures(lines[i])?;
            return Some((i, caps[1].to_string(), FormatClass::CanonicalAnswerLine));
        }
        for (i, line) in lines.iter().enumerate().rev() {
            for re in VARIANT_RES.iter() {
                if let Some(caps) = re.captures_iter(line).last() {
                    return Some((i, caps[1].to_string(), FormatClass::AcceptableVariant));
                }
            }
        }
        let i = lines.iter().rposition(|l| !l.trim().is_empty())?;
        let caps = BARE_RE.captures(lines[i])?;
        Some((i, caps[1].to_string(), FormatClass::BareValue))
    })();
    match found.and_then(|(i, num, class)| parse_number(&num).map(|v| (i, v, class))) {
        Some((i, value, class)) => ParsedAnswer::extracted(value, class, count_steps(&lines[..i])),
        None => ParsedAnswer::failed(completion.truncated, count_steps(&lines)),
    }
}

// ---------------------------------------------------------------------------
// JSON answers

static FENCE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)```[A-Za-z0-9_-]*[ \t]*\r?\n?(.*?)```").expect("valid regex"));

/// Upper bound on candidate start positions tried when scanning for literals.
const MAX_SCAN_STARTS: usize = 256;

/// JSON literals opened by `open`, latest-ending first; among literals that
/// end at the same place the enclosing (outermost) one comes first.
fn literals(text: &str, open: char) -> Vec<Value> {
    let starts: Vec<usize> = text.char_indices().filter(|&(_, c)| c == open).map(|(i, _)| i).collect();
    let mut found: Vec<(usize, usize, Value)> = starts
        .into_iter()
        .rev()
        .take(MAX_SCAN_STARTS)
        .filter_map(|i| {
            let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
            match stream.next() {
                Some(Ok(v)) => Some((i + stream.byte_offset(), i, v)),
                _ => None,
            }
        })
        .collect();
    found.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    found.into_iter().map(|(_, _, v)| v).collect()
}

fn as_index(v: &Value) -> Option<usize> {
    match v {
        Value::Number(n) => n.as_u64().map(|x| x as usize).or_else(|| {
            let f = n.as_f64()?;
            (f >= 0.0 && f.fract() == 0.0 && f < 1e9).then_some(f as usize)
        }),
        Value::String(s) => s.trim().parse::<usize>().ok(),
        _ => None,
    }
}

fn as_number(v: &Value) -> Option<GroundTruth> {
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Some(GroundTruth::Int { value: i })
            } else {
                n.as_f64().filter(|f| f.is_finite()).map(|value| GroundTruth::Real { value, decimals: MATCH_DECIMALS as u8 })
            }
        }
        Value::String(s) => parse_number(s),
        _ => None,
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    as_number(v).and_then(|g| g.as_f64())
}

fn index_list(v: &Value) -> Option<Vec<usize>> {
    v.as_array()?.iter().map(as_index).collect()
}

/// Converts a JSON payload into the expected answer shape.
pub fn value_to_shape(v: &Value, shape: AnswerShape) -> Option<GroundTruth> {
    match shape {
        AnswerShape::Number => as_number(v),
        AnswerShape::VertexSet => index_list(v).map(|nodes| GroundTruth::VertexSet { nodes }),
        AnswerShape::NodeSequence => index_list(v).map(|nodes| GroundTruth::NodeSequence { nodes }),
        AnswerShape::EdgeSet => {
            let edges = v
                .as_array()?
                .iter()
                .map(|e| match index_list(e)?.as_slice() {
                    [u, w] => Some((*u, *w)),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()?;
            Some(GroundTruth::EdgeSet { edges })
        }
        AnswerShape::Partition => match v.as_array()?.as_slice() {
            [a, b] => Some(GroundTruth::Partition { parts: (index_list(a)?, index_list(b)?) }),
            _ => None,
        },
        AnswerShape::Coordinate => {
            let (x, y) = match v {
                Value::Object(m) => (as_f64(m.get("x")?)?, as_f64(m.get("y")?)?),
                Value::Array(a) if a.len() == 2 => (as_f64(&a[0])?, as_f64(&a[1])?),
                _ => return None,
            };
            Some(GroundTruth::Coordinate { x, y })
        }
        AnswerShape::Orientation => {
            let value: Cardinal = v.as_str()?.parse().ok()?;
            Some(GroundTruth::Orientation { value })
        }
        AnswerShape::RelativeOrientation => {
            let value: RelativeTurn = v.as_str()?.parse().ok()?;
            Some(GroundTruth::RelativeOrientation { value })
        }
    }
}

/// Unwraps `{"answer": ...}`; returns the payload and whether the wrapper was present.
fn unwrap_answer(v: &Value) -> (&Value, bool) {
    match v {
        Value::Object(m) => match m.get("answer") {
            Some(inner) => (inner, true),
            None => (v, false),
        },
        _ => (v, false),
    }
}

fn step_estimate(text: &str) -> u32 {
    let lines: Vec<&str> = text.lines().collect();
    count_steps(&lines)
}

/// Extracts a JSON answer of the expected shape.
///
/// Order: fenced code block, last JSON object literal, bare array literal.
/// Only a `{"answer": ...}` wrapper earns the JSON format classes; a bare
/// payload of the right shape is an acceptable variant.
pub fn parse_json_answer(completion: &Completion, shape: AnswerShape) -> ParsedAnswer {
    let text = completion.text.as_str();
    let steps = step_estimate(text);
    let fenced: Vec<&str> = FENCE_RE.captures_iter(text).filter_map(|c| c.get(1)).map(|m| m.as_str()).collect();
    for block in fenced.iter().rev() {
        if let Ok(v) = serde_json::from_str::<Value>(block.trim()) {
            let (payload, wrapped) = unwrap_answer(&v);
            if let Some(value) = value_to_shape(payload, shape) {
                let class = if wrapped { FormatClass::JsonCodeBlock } else { FormatClass::AcceptableVariant };
                return ParsedAnswer::extracted(value, class, steps);
            }
        }
    }
    for v in literals(text, '{') {
        let (payload, wrapped) = unwrap_answer(&v);
        if let Some(value) = value_to_shape(payload, shape) {
            let class = if wrapped { FormatClass::JsonObject } else { FormatClass::AcceptableVariant };
            return ParsedAnswer::extracted(value, class, steps);
        }
    }
    if matches!(
        shape,
        AnswerShape::VertexSet | AnswerShape::EdgeSet | AnswerShape::NodeSequence | AnswerShape::Partition
    ) {
        if let Some(value) = literals(text, '[').iter().find_map(|v| value_to_shape(v, shape)) {
            return ParsedAnswer::extracted(value, FormatClass::BareValue, steps);
        }
    }
    ParsedAnswer::failed(completion.truncated, steps)
}

/// Parses a completion with the family's protocol.
pub fn parse_for(family: TaskFamily, truth: &GroundTruth, completion: &Completion) -> ParsedAnswer {
    match family {
        TaskFamily::Counting => parse_counting(completion),
        TaskFamily::Graph | TaskFamily::Spatial => parse_json_answer(completion, AnswerShape::of(truth)),
    }
}

// ---------------------------------------------------------------------------
// Rendering (inverse of parsing)

/// JSON payload for an answer value, as a model would write it.
pub fn answer_json(value: &GroundTruth) -> Value {
    use serde_json::json;
    match value {
        GroundTruth::Int { value } => json!(value),
        GroundTruth::Real { value, .. } => json!(value),
        GroundTruth::VertexSet { nodes } | GroundTruth::NodeSequence { nodes } => json!(nodes),
        GroundTruth::EdgeSet { edges } => json!(edges.iter().map(|&(u, v)| [u, v]).collect::<Vec<_>>()),
        GroundTruth::Partition { parts } => json!([parts.0, parts.1]),
        GroundTruth::Coordinate { x, y } => json!({"x": x, "y": y}),
        GroundTruth::Orientation { value } => json!(value.as_str()),
        GroundTruth::RelativeOrientation { value } => json!(value.as_str()),
    }
}

/// A scalar in plain decimal notation, at its rendered precision.
pub fn format_number(value: &GroundTruth) -> Option<String> {
    match value {
        GroundTruth::Int { value } => Some(value.to_string()),
        GroundTruth::Real { value, decimals } => Some(format!("{value:.*}", *decimals as usize)),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Matching

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchOptions {
    /// Edge pairs are unordered and node sequences may be reversed.
    pub undirected: bool,
}

fn sorted_unique(v: &[usize]) -> Option<Vec<usize>> {
    let mut s = v.to_vec();
    s.sort_unstable();
    let before = s.len();
    s.dedup();
    (s.len() == before).then_some(s)
}

fn round_eq(a: f64, b: f64) -> bool {
    scaled_round(a, MATCH_DECIMALS) == scaled_round(b, MATCH_DECIMALS)
}

/// Value equality per the evaluation protocol: reals at 3 decimals, sets as
/// sets (duplicates never match), sequences in order.
pub fn values_match(candidate: &GroundTruth, truth: &GroundTruth, opts: MatchOptions) -> bool {
    use GroundTruth as G;
    match (candidate, truth) {
        (G::Int { value: a }, G::Int { value: b }) => a == b,
        (G::Int { .. } | G::Real { .. }, G::Int { .. } | G::Real { .. }) => {
            round_eq(candidate.as_f64().expect("scalar"), truth.as_f64().expect("scalar"))
        }
        (G::Coordinate { x: ax, y: ay }, G::Coordinate { x: bx, y: by }) => round_eq(*ax, *bx) && round_eq(*ay, *by),
        (G::VertexSet { nodes: a }, G::VertexSet { nodes: b }) => {
            matches!((sorted_unique(a), sorted_unique(b)), (Some(x), Some(y)) if x == y)
        }
        (G::NodeSequence { nodes: a }, G::NodeSequence { nodes: b }) => {
            a == b || (opts.undirected && a.iter().rev().eq(b.iter()))
        }
        (G::EdgeSet { edges: a }, G::EdgeSet { edges: b }) => {
            let norm = |e: &[(usize, usize)]| {
                let mut v: Vec<(usize, usize)> =
                    e.iter().map(|&(u, w)| if opts.undirected { (u.min(w), u.max(w)) } else { (u, w) }).collect();
                v.sort_unstable();
                let before = v.len();
                v.dedup();
                (v.len() == before).then_some(v)
            };
            matches!((norm(a), norm(b)), (Some(x), Some(y)) if x == y)
        }
        (G::Partition { parts: (a1, a2) }, G::Partition { parts: (b1, b2) }) => {
            let (a1, a2, b1, b2) = (sorted_unique(a1), sorted_unique(a2), sorted_unique(b1), sorted_unique(b2));
            if [&a1, &a2, &b1, &b2].iter().any(|s| s.is_none()) {
                return false;
            }
            (a1 == b1 && a2 == b2) || (a1 == b2 && a2 == b1)
        }
        (G::Orientation { value: a }, G::Orientation { value: b }) => a == b,
        (G::RelativeOrientation { value: a }, G::RelativeOrientation { value: b }) => a == b,
        _ => false,
    }
}

/// `parsed` matches `truth`; false for anything not extracted.
pub fn match_value(parsed: &ParsedAnswer, truth: &GroundTruth) -> bool {
    match (&parsed.status, &parsed.value) {
        (ExtractionStatus::Extracted, Some(v)) => values_match(v, truth, MatchOptions::default()),
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Normalizer fallback

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalizerError {
    #[error("normalizer unavailable: {0}")]
    Unavailable(String),
    #[error("normalizer fallback only applies to failed extractions (status was {0:?})")]
    Precondition(ExtractionStatus),
    #[error("normalizer fallback does not apply to {0} problems")]
    NotApplicable(TaskFamily),
}

/// External canonicalizer: turns a free-form completion into answer JSON text.
pub trait Normalizer: Send + Sync {
    fn canonicalize(&self, problem: &ProblemInstance, completion: &str) -> Result<String, NormalizerError>;
}

/// Offline stand-in: pulls the last numbers / tokens out of the text with regexes.
#[derive(Debug, Clone, Copy, Default)]
pub struct RegexNormalizer;

static INT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").expect("valid regex"));
static PAIR_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)").expect("valid regex"));
static GROUP_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[\[{(]([\d,\s]*)[\]})]").expect("valid regex"));
static CARDINAL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(east|north|west|south)\b").expect("valid regex"));
static RELATIVE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(same|left[- _]of|opposite|right[- _]of)\b").expect("valid regex"));

impl Normalizer for RegexNormalizer {
    fn canonicalize(&self, problem: &ProblemInstance, completion: &str) -> Result<String, NormalizerError> {
        let last_line = completion.lines().rev().find(|l| NUM_RE.is_match(l) || !l.trim().is_empty()).unwrap_or("");
        let ints = |s: &str| INT_RE.find_iter(s).filter_map(|m| m.as_str().parse::<u64>().ok()).collect::<Vec<_>>();
        let payload = match AnswerShape::of(&problem.truth) {
            AnswerShape::Number => {
                let n = NUM_RE.find_iter(completion).last().map(|m| m.as_str().replace(',', ""));
                n.map(|n| Value::String(n))
            }
            AnswerShape::VertexSet | AnswerShape::NodeSequence => Some(serde_json::json!(ints(last_line))),
            AnswerShape::EdgeSet => {
                let pairs: Vec<[u64; 2]> = PAIR_RE
                    .captures_iter(completion)
                    .filter_map(|c| Some([c[1].parse().ok()?, c[2].parse().ok()?]))
                    .collect();
                Some(serde_json::json!(pairs))
            }
            AnswerShape::Partition => {
                let groups: Vec<Vec<u64>> = GROUP_RE.captures_iter(completion).map(|c| ints(&c[1])).collect();
                (groups.len() >= 2).then(|| serde_json::json!([groups[groups.len() - 2], groups[groups.len() - 1]]))
            }
            AnswerShape::Coordinate => {
                let nums: Vec<String> = NUM_RE.find_iter(completion).map(|m| m.as_str().replace(',', "")).collect();
                (nums.len() >= 2).then(|| serde_json::json!({"x": nums[nums.len() - 2], "y": nums[nums.len() - 1]}))
            }
            AnswerShape::Orientation => {
                CARDINAL_RE.find_iter(completion).last().map(|m| Value::String(m.as_str().to_string()))
            }
            AnswerShape::RelativeOrientation => {
                RELATIVE_RE.find_iter(completion).last().map(|m| Value::String(m.as_str().to_string()))
            }
        };
        Ok(match payload {
            Some(p) => serde_json::json!({ "answer": p }).to_string(),
            None => String::new(),
        })
    }
}

/// HTTP normalizer: POSTs `{problem, completion}` and reads `{canonical}`.
pub struct HttpNormalizer {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpNormalizer {
    /// Reads the credential from [`NORMALIZER_KEY_ENV`].
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, NormalizerError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| NormalizerError::Unavailable(e.to_string()))?;
        Ok(HttpNormalizer { endpoint: endpoint.into(), api_key: std::env::var(NORMALIZER_KEY_ENV).ok(), client })
    }
}

#[derive(Serialize)]
struct NormalizeRequest<'a> {
    problem: &'a str,
    completion: &'a str,
}

#[derive(Deserialize)]
struct NormalizeResponse {
    canonical: String,
}

impl Normalizer for HttpNormalizer {
    fn canonicalize(&self, problem: &ProblemInstance, completion: &str) -> Result<String, NormalizerError> {
        let mut req = self.client.post(&self.endpoint).json(&NormalizeRequest { problem: &problem.prompt, completion });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| NormalizerError::Unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(NormalizerError::Unavailable(format!("status {}", resp.status())));
        }
        let body: NormalizeResponse = resp.json().map_err(|e| NormalizerError::Unavailable(e.to_string()))?;
        Ok(body.canonical)
    }
}

/// Re-parses a failed extraction through the normalizer.
///
/// Returns the recovered answer (classed as an acceptable variant), or
/// `primary` unchanged when the normalizer output still does not parse.
pub fn normalize_with_fallback(
    completion: &Completion,
    primary: &ParsedAnswer,
    problem: &ProblemInstance,
    normalizer: &dyn Normalizer,
) -> Result<ParsedAnswer, NormalizerError> {
    if problem.family == TaskFamily::Counting {
        return Err(NormalizerError::NotApplicable(TaskFamily::Counting));
    }
    if primary.status != ExtractionStatus::ExtractionFailed {
        return Err(NormalizerError::Precondition(primary.status));
    }
    let canonical = normalizer.canonicalize(problem, &completion.text)?;
    let reparsed = parse_json_answer(&Completion::new(canonical), AnswerShape::of(&problem.truth));
    Ok(match reparsed.value {
        Some(value) => ParsedAnswer::extracted(value, FormatClass::AcceptableVariant, primary.step_count),
        None => primary.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counting(text: &str) -> ParsedAnswer {
        parse_counting(&Completion::new(text))
    }

    #[test]
    fn canonical_answer_line() {
        let p = counting("Even numbers: 50\nDivisible by 3: 16\nAnswer: 16");
        assert_eq!(p.status, ExtractionStatus::Extracted);
        assert_eq!(p.value, Some(GroundTruth::Int { value: 16 }));
        assert_eq!(p.format_class, FormatClass::CanonicalAnswerLine);
        assert_eq!(p.step_count, 2);
    }

    #[test]
    fn empty_and_wordy_fail() {
        assert_eq!(counting("").status, ExtractionStatus::ExtractionFailed);
        let p = counting("The count is sixteen");
        assert_eq!(p.status, ExtractionStatus::ExtractionFailed);
        assert_eq!(p.format_class, FormatClass::Invalid);
        assert_eq!(p.value, None);
    }

    #[test]
    fn variants() {
        for (text, class) in [
            ("**Answer:** 16", FormatClass::AcceptableVariant),
            ("**Answer: 16**", FormatClass::AcceptableVariant),
            ("So the answer is 16.", FormatClass::AcceptableVariant),
            ("Final Answer: 16", FormatClass::AcceptableVariant),
            ("answer: 16", FormatClass::AcceptableVariant),
            ("Answer: 16.", FormatClass::AcceptableVariant),
            ("$\\boxed{16}$", FormatClass::AcceptableVariant),
            ("work\n16", FormatClass::BareValue),
        ] {
            let p = counting(text);
            assert_eq!(p.value, Some(GroundTruth::Int { value: 16 }), "{text}");
            assert_eq!(p.format_class, class, "{text}");
        }
    }

    #[test]
    fn canonical_wins_over_earlier_numbers() {
        let p = counting("The answer is 15.\nWait, recount.\nAnswer: 16\nThe answer is 17");
        assert_eq!(p.value, Some(GroundTruth::Int { value: 16 }));
        assert_eq!(p.format_class, FormatClass::CanonicalAnswerLine);
    }

    #[test]
    fn numbers_with_separators_and_decimals() {
        assert_eq!(counting("Answer: 1,234").value, Some(GroundTruth::Int { value: 1234 }));
        assert_eq!(counting("Answer: -12.50").value, Some(GroundTruth::Real { value: -12.5, decimals: 2 }));
    }

    #[test]
    fn truncated_without_answer() {
        let p = parse_counting(&Completion::truncated("Step 1: list the evens"));
        assert_eq!(p.status, ExtractionStatus::Truncated);
    }

    #[test]
    fn enumerated_steps_counted() {
        let p = counting("1. a 2. b\n1) x\n2) y\n3) z\nAnswer: 3");
        assert_eq!(p.step_count, 4);
    }

    #[test]
    fn json_code_block() {
        let p = parse_json_answer(&Completion::new("```json\n{\"answer\": [1,2,3,4]}\n```"), AnswerShape::VertexSet);
        assert_eq!(p.value, Some(GroundTruth::VertexSet { nodes: vec![1, 2, 3, 4] }));
        assert_eq!(p.format_class, FormatClass::JsonCodeBlock);
    }

    #[test]
    fn json_object_coordinate() {
        let p = parse_json_answer(&Completion::new("{\"answer\": {\"x\": -5.0, \"y\": 1.0}}"), AnswerShape::Coordinate);
        assert_eq!(p.value, Some(GroundTruth::Coordinate { x: -5.0, y: 1.0 }));
        assert_eq!(p.format_class, FormatClass::JsonObject);
    }

    #[test]
    fn json_failures_and_coercion() {
        let p = parse_json_answer(&Completion::new("prose with no braces"), AnswerShape::Coordinate);
        assert_eq!(p.status, ExtractionStatus::ExtractionFailed);
        let p = parse_json_answer(&Completion::new("{\"answer\": [\"1\", \"3\"]}"), AnswerShape::VertexSet);
        assert_eq!(p.value, Some(GroundTruth::VertexSet { nodes: vec![1, 3] }));
        let p = parse_json_answer(&Completion::new("so [0, 2, 4]"), AnswerShape::NodeSequence);
        assert_eq!(p.format_class, FormatClass::BareValue);
        let p = parse_json_answer(&Completion::new("{\"answer\": \"left_of\"}"), AnswerShape::RelativeOrientation);
        assert_eq!(p.value, Some(GroundTruth::RelativeOrientation { value: RelativeTurn::LeftOf }));
    }

    #[test]
    fn matching_rules() {
        let truth = GroundTruth::Coordinate { x: -5.0, y: 1.0 };
        assert!(values_match(&GroundTruth::Coordinate { x: -5.0004, y: 1.0 }, &truth, MatchOptions::default()));
        assert!(!values_match(&GroundTruth::Coordinate { x: -5.0006, y: 1.0 }, &truth, MatchOptions::default()));
        let set = GroundTruth::VertexSet { nodes: vec![1, 2, 3, 4] };
        assert!(values_match(&GroundTruth::VertexSet { nodes: vec![4, 3, 2, 1] }, &set, MatchOptions::default()));
        assert!(!values_match(&GroundTruth::VertexSet { nodes: vec![1, 2, 3, 4, 4] }, &set, MatchOptions::default()));
        let seq = GroundTruth::NodeSequence { nodes: vec![0, 1, 2] };
        let rev = GroundTruth::NodeSequence { nodes: vec![2, 1, 0] };
        assert!(!values_match(&rev, &seq, MatchOptions::default()));
        assert!(values_match(&rev, &seq, MatchOptions { undirected: true }));
        assert!(values_match(&GroundTruth::Int { value: 16 }, &GroundTruth::Int { value: 16 }, MatchOptions::default()));
        assert!(!values_match(&GroundTruth::Int { value: 16 }, &seq, MatchOptions::default()));
    }
}
