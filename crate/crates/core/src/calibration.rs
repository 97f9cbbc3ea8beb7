//! Difficulty tiers from multi-model pass rates, and stratified curation of
//! training and test subsets.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, seeded_rng};
use crate::types::{DifficultyTier, TaskFamily};

/// How many missing (problem, model) pairs an error message lists.
const MAX_LISTED: usize = 10;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("model roster is empty")]
    EmptyRoster,
    #[error("duplicate record for problem `{problem_id}` and model `{model_id}`")]
    DuplicateRecord { problem_id: String, model_id: String },
    #[error("record for model `{0}` which is not in the roster")]
    UnknownModel(String),
    #[error("incomplete record matrix: {count} (problem, model) pairs missing, e.g. {examples}")]
    Incomplete { count: usize, examples: String },
    #[error("invalid thresholds: need 0 <= medium ({medium}) <= easy ({easy}) <= 1")]
    Thresholds { easy: f64, medium: f64 },
    #[error("not enough problems: {0}")]
    Shortfall(String),
    #[error("overlapping subset requests: `{0}` requested twice")]
    Overlap(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One model's pass/fail on one problem.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub problem_id: String,
    pub model_id: String,
    pub passed: bool,
    /// The model could not be queried; the record counts as not passed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inference_error: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierThresholds {
    /// Pass rates at or above this are Easy.
    pub easy: f64,
    /// Pass rates at or above this (and below `easy`) are Medium.
    pub medium: f64,
}

impl Default for TierThresholds {
    fn default() -> Self {
        TierThresholds { easy: 0.67, medium: 0.34 }
    }
}

impl TierThresholds {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if (0.0..=1.0).contains(&self.medium) && (0.0..=1.0).contains(&self.easy) && self.medium <= self.easy {
            Ok(())
        } else {
            Err(CalibrationError::Thresholds { easy: self.easy, medium: self.medium })
        }
    }

    pub fn tier(&self, pass_rate: f64) -> DifficultyTier {
        if pass_rate >= self.easy {
            DifficultyTier::Easy
        } else if pass_rate >= self.medium {
            DifficultyTier::Medium
        } else {
            DifficultyTier::Hard
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierEntry {
    pub passed: usize,
    /// Models counted in the denominator.
    pub attempted: usize,
    pub pass_rate: f64,
    pub tier: DifficultyTier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierManifest {
    pub roster: Vec<String>,
    pub thresholds: TierThresholds,
    pub problems: BTreeMap<String, TierEntry>,
}

impl TierManifest {
    pub fn tier_of(&self, id: &str) -> Option<DifficultyTier> {
        self.problems.get(id).map(|e| e.tier)
    }

    /// Problem ids per tier, in id order.
    pub fn by_tier(&self) -> BTreeMap<DifficultyTier, Vec<String>> {
        let mut out: BTreeMap<DifficultyTier, Vec<String>> = DifficultyTier::ALL.iter().map(|&t| (t, Vec::new())).collect();
        for (id, e) in &self.problems {
            out.get_mut(&e.tier).expect("all tiers present").push(id.clone());
        }
        out
    }

    pub fn tier_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for e in self.problems.values() {
            c[e.tier as usize] += 1;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TierOptions {
    pub thresholds: TierThresholds,
    /// Drop failed inferences from the denominator instead of counting them as fails.
    pub exclude_inference_errors: bool,
}

pub fn compute_tiers(records: &[CalibrationRecord], roster: &[String]) -> Result<TierManifest, CalibrationError> {
    compute_tiers_with(records, roster, TierOptions::default())
}

pub fn compute_tiers_with(
    records: &[CalibrationRecord],
    roster: &[String],
    opts: TierOptions,
) -> Result<TierManifest, CalibrationError> {
    opts.thresholds.validate()?;
    if roster.is_empty() {
        return Err(CalibrationError::EmptyRoster);
    }
    let models: HashSet<&str> = roster.iter().map(String::as_str).collect();
    let mut matrix: BTreeMap<&str, HashMap<&str, &CalibrationRecord>> = BTreeMap::new();
    for r in records {
        if !models.contains(r.model_id.as_str()) {
            return Err(CalibrationError::UnknownModel(r.model_id.clone()));
        }
        if matrix.entry(&r.problem_id).or_default().insert(&r.model_id, r).is_some() {
            return Err(CalibrationError::DuplicateRecord { problem_id: r.problem_id.clone(), model_id: r.model_id.clone() });
        }
    }
    let mut missing = Vec::new();
    for (problem, row) in &matrix {
        for m in roster {
            if !row.contains_key(m.as_str()) {
                missing.push(format!("({problem}, {m})"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(CalibrationError::Incomplete {
            count: missing.len(),
            examples: missing.iter().take(MAX_LISTED).cloned().collect::<Vec<_>>().join(", "),
        });
    }
    let problems = matrix
        .into_iter()
        .map(|(id, row)| {
            let counted: Vec<&&CalibrationRecord> =
                row.values().filter(|r| !(opts.exclude_inference_errors && r.inference_error)).collect();
            let passed = counted.iter().filter(|r| r.passed).count();
            let attempted = counted.len();
            let pass_rate = if attempted == 0 { 0.0 } else { passed as f64 / attempted as f64 };
            (id.to_string(), TierEntry { passed, attempted, pass_rate, tier: opts.thresholds.tier(pass_rate) })
        })
        .collect();
    Ok(TierManifest { roster: roster.to_vec(), thresholds: opts.thresholds, problems })
}

// ---------------------------------------------------------------------------
// Curation

pub const TEST_SUBSET: &str = "test";
pub const VALIDATION_SUBSET: &str = "validation";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationPlan {
    pub easy_sizes: Vec<usize>,
    pub mixed_sizes: Vec<usize>,
    pub test_size: usize,
    #[serde(default)]
    pub validation_size: usize,
    pub seed: u64,
}

impl CurationPlan {
    /// Easy and mixed subsets of 100, 200 and 500; test of 200 (500 for graph).
    pub fn default_for(family: TaskFamily) -> Self {
        CurationPlan {
            easy_sizes: vec![100, 200, 500],
            mixed_sizes: vec![100, 200, 500],
            test_size: if family == TaskFamily::Graph { 500 } else { 200 },
            validation_size: 0,
            seed: 0,
        }
    }

    fn requests(&self) -> Result<Vec<(String, Option<DifficultyTier>, usize)>, CalibrationError> {
        let mut out = Vec::new();
        let mut names = HashSet::new();
        for (prefix, sizes, tier) in [("easy", &self.easy_sizes, Some(DifficultyTier::Easy)), ("mixed", &self.mixed_sizes, None)] {
            for &size in sizes {
                let name = format!("{prefix}_{size}");
                if !names.insert(name.clone()) {
                    return Err(CalibrationError::Overlap(name));
                }
                out.push((name, tier, size));
            }
        }
        Ok(out)
    }
}

/// Per-tier quotas for a stratified subset: `size / 3` each, remainder to
/// Easy first, then Medium (100 splits as 34/33/33).
pub fn stratified_quotas(size: usize) -> [usize; 3] {
    let (base, rem) = (size / 3, size % 3);
    [base + usize::from(rem >= 1), base + usize::from(rem >= 2), base]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub plan: CurationPlan,
    /// Subset name to problem ids, sorted.
    pub subsets: BTreeMap<String, Vec<String>>,
}

fn take_stratified(
    pools: &mut [Vec<String>; 3],
    size: usize,
    name: &str,
) -> Result<Vec<String>, CalibrationError> {
    let quotas = stratified_quotas(size);
    for (t, q) in quotas.iter().enumerate() {
        if pools[t].len() < *q {
            return Err(CalibrationError::Shortfall(format!(
                "`{name}` needs {q} {} problems but only {} remain",
                DifficultyTier::ALL[t].as_str(),
                pools[t].len()
            )));
        }
    }
    let mut out = Vec::with_capacity(size);
    for (t, q) in quotas.iter().enumerate() {
        out.extend(pools[t].drain(..*q));
    }
    out.sort();
    Ok(out)
}

/// Draws `quotas[t]` ids per tier from `pools` without removing them.
fn sample(pools: &[Vec<String>; 3], quotas: [usize; 3], seed: u64, name: &str) -> Result<Vec<String>, CalibrationError> {
    let mut rng = seeded_rng(seed);
    let mut out = Vec::new();
    for (t, &q) in quotas.iter().enumerate() {
        if pools[t].len() < q {
            return Err(CalibrationError::Shortfall(format!(
                "`{name}` needs {q} {} problems but only {} remain outside the held-out sets",
                DifficultyTier::ALL[t].as_str(),
                pools[t].len()
            )));
        }
        out.extend(pools[t].choose_multiple(&mut rng, q).cloned());
    }
    out.sort();
    Ok(out)
}

/// Curates the test set first (stratified), then an optional validation set,
/// then every training subset independently from what remains.
pub fn curate_splits(manifest: &TierManifest, plan: &CurationPlan) -> Result<SplitManifest, CalibrationError> {
    let requests = plan.requests()?;
    let by_tier = manifest.by_tier();
    let mut rng = seeded_rng(derive_seed(plan.seed, "held-out"));
    let mut pools: [Vec<String>; 3] = DifficultyTier::ALL.map(|t| {
        let mut ids = by_tier[&t].clone();
        ids.shuffle(&mut rng);
        ids
    });
    let mut subsets = BTreeMap::new();
    subsets.insert(TEST_SUBSET.to_string(), take_stratified(&mut pools, plan.test_size, TEST_SUBSET)?);
    if plan.validation_size > 0 {
        subsets.insert(VALIDATION_SUBSET.to_string(), take_stratified(&mut pools, plan.validation_size, VALIDATION_SUBSET)?);
    }
    for p in pools.iter_mut() {
        p.sort();
    }
    for (name, tier, size) in requests {
        let quotas = match tier {
            Some(t) => {
                let mut q = [0; 3];
                q[t as usize] = size;
                q
            }
            None => stratified_quotas(size),
        };
        let ids = sample(&pools, quotas, derive_seed(plan.seed, &name), &name)?;
        subsets.insert(name, ids);
    }
    Ok(SplitManifest { plan: plan.clone(), subsets })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestReport {
    pub checks: Vec<Check>,
}

impl ManifestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: String, problems: Vec<String>) {
        let detail = if problems.is_empty() {
            String::new()
        } else {
            let mut d = problems.iter().take(MAX_LISTED).cloned().collect::<Vec<_>>().join(", ");
            if problems.len() > MAX_LISTED {
                d.push_str(&format!(" (+{} more)", problems.len() - MAX_LISTED));
            }
            d
        };
        self.checks.push(Check { name, passed: problems.is_empty(), detail });
    }
}

fn tier_count_of(ids: &[String], manifest: &TierManifest) -> [usize; 3] {
    let mut c = [0; 3];
    for id in ids {
        if let Some(t) = manifest.tier_of(id) {
            c[t as usize] += 1;
        }
    }
    c
}

/// Re-checks every split invariant; violations are report entries, not errors.
pub fn verify_manifest(splits: &SplitManifest, manifest: &TierManifest) -> ManifestReport {
    let mut report = ManifestReport { checks: Vec::new() };
    let empty = Vec::new();
    let test = splits.subsets.get(TEST_SUBSET).unwrap_or(&empty);
    let held_out: Vec<(&str, &Vec<String>)> = [TEST_SUBSET, VALIDATION_SUBSET]
        .iter()
        .filter_map(|n| splits.subsets.get(*n).map(|v| (*n, v)))
        .collect();

    for (name, ids) in &splits.subsets {
        let unknown: Vec<String> = ids.iter().filter(|id| !manifest.problems.contains_key(*id)).cloned().collect();
        report.push(format!("{name}: ids known"), unknown);
        let mut seen = HashSet::new();
        let dups: Vec<String> = ids.iter().filter(|id| !seen.insert(id.as_str())).cloned().collect();
        report.push(format!("{name}: no duplicate ids"), dups);
    }

    report.push(
        format!("{TEST_SUBSET}: size {}", splits.plan.test_size),
        if test.len() == splits.plan.test_size { vec![] } else { vec![format!("has {} ids", test.len())] },
    );
    for (name, ids) in &splits.subsets {
        if name == TEST_SUBSET || name == VALIDATION_SUBSET {
            continue;
        }
        for (h, held) in &held_out {
            let held: HashSet<&String> = held.iter().collect();
            let shared: Vec<String> = ids.iter().filter(|id| held.contains(id)).cloned().collect();
            report.push(format!("{name}: disjoint from {h}"), shared);
        }
    }
    if let Some(val) = splits.subsets.get(VALIDATION_SUBSET) {
        let t: HashSet<&String> = test.iter().collect();
        report.push(
            format!("{VALIDATION_SUBSET}: disjoint from {TEST_SUBSET}"),
            val.iter().filter(|id| t.contains(id)).cloned().collect(),
        );
    }

    for (name, ids) in &splits.subsets {
        let counts = tier_count_of(ids, manifest);
        if name.starts_with("easy_") {
            let off: Vec<String> =
                ids.iter().filter(|id| manifest.tier_of(id).is_some_and(|t| t != DifficultyTier::Easy)).cloned().collect();
            report.push(format!("{name}: easy tier only"), off);
        } else {
            let third = ids.len() as f64 / 3.0;
            let off: Vec<String> = DifficultyTier::ALL
                .iter()
                .zip(counts)
                .filter(|(_, c)| (*c as f64 - third).abs() > 1.0)
                .map(|(t, c)| format!("{} has {c} of {}", t.as_str(), ids.len()))
                .collect();
            report.push(format!("{name}: stratified within 1 of size/3"), off);
        }
        if let Some(size) = name.rsplit_once('_').and_then(|(_, s)| s.parse::<usize>().ok()) {
            report.push(
                format!("{name}: size {size}"),
                if ids.len() == size { vec![] } else { vec![format!("has {} ids", ids.len())] },
            );
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Files

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<CalibrationRecord>, CalibrationError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| CalibrationError::Malformed { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok(out)
}

pub fn write_records(records: &[CalibrationRecord], path: impl AsRef<Path>) -> Result<(), CalibrationError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r).expect("records serialize"))?;
    }
    w.flush()?;
    Ok(())
}

/// Model ids in first-seen order.
pub fn roster_of(records: &[CalibrationRecord]) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for r in records {
        if seen.insert(r.model_id.as_str()) {
            out.push(r.model_id.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(pass_counts: &[usize], models: usize) -> (Vec<CalibrationRecord>, Vec<String>) {
        let roster: Vec<String> = (0..models).map(|m| format!("m{m:03}")).collect();
        let mut records = Vec::new();
        for (p, &k) in pass_counts.iter().enumerate() {
            for (m, model) in roster.iter().enumerate() {
                records.push(CalibrationRecord {
                    problem_id: format!("p{p:05}"),
                    model_id: model.clone(),
                    passed: m < k,
                    inference_error: false,
                });
            }
        }
        (records, roster)
    }

    #[test]
    fn ten_model_examples() {
        let (records, roster) = matrix(&[7, 0, 5], 10);
        let m = compute_tiers(&records, &roster).unwrap();
        let tiers: Vec<_> = m.problems.values().map(|e| e.tier).collect();
        assert_eq!(tiers, vec![DifficultyTier::Easy, DifficultyTier::Hard, DifficultyTier::Medium]);
        assert_eq!(m.problems["p00000"].pass_rate, 0.7);
    }

    #[test]
    fn hundred_model_boundaries() {
        let (records, roster) = matrix(&[67, 66, 34, 33], 100);
        let m = compute_tiers(&records, &roster).unwrap();
        let tiers: Vec<_> = m.problems.values().map(|e| e.tier).collect();
        use DifficultyTier::*;
        assert_eq!(tiers, vec![Easy, Medium, Medium, Hard]);
    }

    #[test]
    fn incomplete_and_duplicate_matrices() {
        let (mut records, roster) = matrix(&[3, 4], 5);
        records.remove(1);
        let err = compute_tiers(&records, &roster).unwrap_err();
        assert!(matches!(err, CalibrationError::Incomplete { count: 1, .. }), "{err}");
        let (mut records, roster) = matrix(&[3], 5);
        records.push(records[0].clone());
        assert!(matches!(compute_tiers(&records, &roster), Err(CalibrationError::DuplicateRecord { .. })));
        assert!(matches!(compute_tiers(&records, &[]), Err(CalibrationError::EmptyRoster)));
    }

    #[test]
    fn quotas() {
        assert_eq!(stratified_quotas(100), [34, 33, 33]);
        assert_eq!(stratified_quotas(200), [67, 67, 66]);
        assert_eq!(stratified_quotas(500), [167, 167, 166]);
    }

    fn population(easy: usize, medium: usize, hard: usize) -> TierManifest {
        let counts: Vec<usize> =
            std::iter::repeat(9).take(easy).chain(std::iter::repeat(5).take(medium)).chain(std::iter::repeat(0).take(hard)).collect();
        let (records, roster) = matrix(&counts, 10);
        compute_tiers(&records, &roster).unwrap()
    }

    #[test]
    fn curation_is_disjoint_stratified_and_deterministic() {
        let m = population(1000, 600, 600);
        let plan = CurationPlan { seed: 4, ..CurationPlan::default_for(TaskFamily::Graph) };
        let a = curate_splits(&m, &plan).unwrap();
        assert_eq!(a, curate_splits(&m, &plan).unwrap());
        assert_eq!(a.subsets["test"].len(), 500);
        assert_eq!(tier_count_of(&a.subsets["mixed_100"], &m), [34, 33, 33]);
        let report = verify_manifest(&a, &m);
        assert!(report.all_passed(), "{:?}", report.failures().collect::<Vec<_>>());
    }

    #[test]
    fn easy_shortfall() {
        let m = population(400, 300, 300);
        let plan = CurationPlan { easy_sizes: vec![500], mixed_sizes: vec![], test_size: 0, validation_size: 0, seed: 1 };
        assert!(matches!(curate_splits(&m, &plan), Err(CalibrationError::Shortfall(_))));
    }

    #[test]
    fn corrupted_manifests_fail_checks() {
        let m = population(800, 400, 400);
        let plan = CurationPlan::default_for(TaskFamily::Counting);
        let mut s = curate_splits(&m, &plan).unwrap();
        let leaked = s.subsets["test"][0].clone();
        s.subsets.get_mut("easy_100").unwrap()[0] = leaked.clone();
        let report = verify_manifest(&s, &m);
        let failed: Vec<_> = report.failures().map(|c| c.name.clone()).collect();
        assert!(failed.contains(&"easy_100: disjoint from test".to_string()), "{failed:?}");
        assert!(report.failures().any(|c| c.detail.contains(&leaked)));

        let by_tier = m.by_tier();
        let skewed: Vec<String> = by_tier[&DifficultyTier::Easy][..40]
            .iter()
            .chain(&by_tier[&DifficultyTier::Medium][..40])
            .chain(&by_tier[&DifficultyTier::Hard][..20])
            .cloned()
            .collect();
        let mut s = curate_splits(&m, &plan).unwrap();
        s.subsets.insert("mixed_100".into(), skewed);
        let report = verify_manifest(&s, &m);
        assert!(report.failures().any(|c| c.name == "mixed_100: stratified within 1 of size/3"));
    }
}
