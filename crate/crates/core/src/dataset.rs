//! JSONL dataset files.
//!
//! One [`ProblemInstance`] per line, each object carrying `"schema_version": 1`.
//! Loading re-validates every instance: the prompt must re-render byte for
//! byte from the spec, the truth must re-solve to the same value and the
//! complexity metadata must match.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::types::{ProblemInstance, ProblemSpec};
use crate::{counting, graph, spatial};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("duplicate instance id `{0}`")]
    DuplicateId(String),
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    VersionMismatch { line: usize, found: String },
    #[error("line {line}: instance `{id}` fails validation: {reason}")]
    Invariant { line: usize, id: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How thoroughly [`read_dataset_with`] re-checks loaded instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validation {
    /// Structure, prompt, complexity and truth (re-solves every instance).
    Full,
    /// Structure, prompt and complexity; skips re-solving.
    Structural,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    schema_version: u64,
    #[serde(flatten)]
    instance: &'a ProblemInstance,
}

/// Serializes one instance as a single JSONL line (no trailing newline).
pub fn to_jsonl_line(instance: &ProblemInstance) -> String {
    serde_json::to_string(&RecordOut { schema_version: SCHEMA_VERSION, instance })
        .expect("problem instances always serialize")
}

/// Writes `instances` to `out`, returning the record count.
pub fn write_dataset_to<W: Write>(instances: &[ProblemInstance], mut out: W) -> Result<usize, DatasetError> {
    let mut seen = HashSet::with_capacity(instances.len());
    for inst in instances {
        if !seen.insert(inst.id.as_str()) {
            return Err(DatasetError::DuplicateId(inst.id.clone()));
        }
    }
    for inst in instances {
        out.write_all(to_jsonl_line(inst).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(instances.len())
}

/// Writes `instances` to the file at `path`, creating parent directories.
pub fn write_dataset(instances: &[ProblemInstance], path: impl AsRef<Path>) -> Result<usize, DatasetError> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    // Check ids before touching the destination.
    let mut seen = HashSet::with_capacity(instances.len());
    for inst in instances {
        if !seen.insert(inst.id.as_str()) {
            return Err(DatasetError::DuplicateId(inst.id.clone()));
        }
    }
    let file = BufWriter::new(File::create(path)?);
    write_dataset_to(instances, file)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<ProblemInstance>, DatasetError> {
    read_dataset_with(path, Validation::Full)
}

pub fn read_dataset_with(path: impl AsRef<Path>, validation: Validation) -> Result<Vec<ProblemInstance>, DatasetError> {
    read_dataset_from(File::open(path)?, validation)
}

pub fn read_dataset_from<R: Read>(source: R, validation: Validation) -> Result<Vec<ProblemInstance>, DatasetError> {
    let reader = BufReader::new(source);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst = parse_line(&line, line_no)?;
        validate_instance(&inst, validation).map_err(|reason| DatasetError::Invariant {
            line: line_no,
            id: inst.id.clone(),
            reason,
        })?;
        if !seen.insert(inst.id.clone()) {
            return Err(DatasetError::DuplicateId(inst.id));
        }
        out.push(inst);
    }
    Ok(out)
}

fn parse_line(line: &str, line_no: usize) -> Result<ProblemInstance, DatasetError> {
    let mut value: serde_json::Value = serde_json::from_str(line).map_err(|e| DatasetError::Malformed {
        line: line_no,
        message: e.to_string(),
    })?;
    let obj = value.as_object_mut().ok_or_else(|| DatasetError::Malformed {
        line: line_no,
        message: "expected a JSON object".into(),
    })?;
    match obj.remove("schema_version") {
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(v) => return Err(DatasetError::VersionMismatch { line: line_no, found: v.to_string() }),
        None => return Err(DatasetError::VersionMismatch { line: line_no, found: "<missing>".into() }),
    }
    serde_json::from_value(value).map_err(|e| DatasetError::Malformed {
        line: line_no,
        message: e.to_string(),
    })
}

/// Re-checks every [`ProblemInstance`] invariant; returns a human-readable reason on failure.
pub fn validate_instance(inst: &ProblemInstance, validation: Validation) -> Result<(), String> {
    if inst.family != inst.spec.family() {
        return Err(format!("family `{}` does not match spec kind `{}`", inst.family, inst.spec.family()));
    }
    let (prompt, complexity) = match &inst.spec {
        ProblemSpec::Counting(spec) => {
            spec.validate().map_err(|e| e.to_string())?;
            (counting::render_counting_prompt(spec), counting::complexity(spec))
        }
        ProblemSpec::Graph(problem) => {
            problem.validate().map_err(|e| e.to_string())?;
            (graph::render_graph_prompt(problem), graph::complexity(problem))
        }
        ProblemSpec::Spatial(problem) => {
            problem.validate().map_err(|e| e.to_string())?;
            (spatial::render_spatial_prompt(problem), spatial::complexity(problem))
        }
    };
    if prompt != inst.prompt {
        return Err("prompt does not re-render from spec".into());
    }
    if complexity != inst.complexity {
        return Err("complexity metadata does not match spec".into());
    }
    if validation == Validation::Full {
        let truth = match &inst.spec {
            ProblemSpec::Counting(spec) => counting::evaluate_counting(spec).map_err(|e| e.to_string())?,
            ProblemSpec::Graph(problem) => {
                graph::solve_exact(problem, &graph::Budget::unlimited())
                    .map_err(|e| e.to_string())?
                    .witness
            }
            ProblemSpec::Spatial(problem) => spatial::simulate(problem),
        };
        if truth != inst.truth {
            return Err("truth does not re-solve from spec".into());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::{AggregateOp, CountingSpec, PipelineStep};

    fn sample(n: usize) -> Vec<ProblemInstance> {
        (0..n)
            .map(|i| {
                let spec = CountingSpec {
                    range_lo: 1,
                    range_hi: 10 + i as i64,
                    pipeline: vec![PipelineStep::KeepEven],
                    final_op: AggregateOp::Sum,
                };
                counting::instance_from_spec(spec, 5, i).unwrap()
            })
            .collect()
    }

    #[test]
    fn empty_dataset_round_trips() {
        let mut buf = Vec::new();
        assert_eq!(write_dataset_to(&[], &mut buf).unwrap(), 0);
        assert!(buf.is_empty());
        assert!(read_dataset_from(&buf[..], Validation::Full).unwrap().is_empty());
    }

    #[test]
    fn three_instances_round_trip() {
        let items = sample(3);
        let mut buf = Vec::new();
        assert_eq!(write_dataset_to(&items, &mut buf).unwrap(), 3);
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), 3);
        assert_eq!(read_dataset_from(&buf[..], Validation::Full).unwrap(), items);
    }

    #[test]
    fn duplicate_id_rejected() {
        let mut items = sample(2);
        items[1].id = items[0].id.clone();
        let err = write_dataset_to(&items, Vec::new()).unwrap_err();
        assert!(matches!(err, DatasetError::DuplicateId(ref id) if id == "counting-5-0"), "{err}");
    }

    #[test]
    fn corrupted_line_cites_line_number() {
        let items = sample(3);
        let mut buf = Vec::new();
        write_dataset_to(&items, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[1] = "{\"schema_version\": 1, \"id\": ";
        let corrupted = lines.join("\n");
        let err = read_dataset_from(corrupted.as_bytes(), Validation::Full).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { line: 2, .. }), "{err}");
    }

    #[test]
    fn unknown_schema_version_rejected() {
        let line = to_jsonl_line(&sample(1)[0]).replace("\"schema_version\":1", "\"schema_version\":2");
        let err = read_dataset_from(line.as_bytes(), Validation::Full).unwrap_err();
        assert!(matches!(err, DatasetError::VersionMismatch { line: 1, .. }), "{err}");
    }

    #[test]
    fn tampered_truth_rejected() {
        let mut items = sample(1);
        items[0].truth = crate::types::GroundTruth::Int { value: -1 };
        let line = to_jsonl_line(&items[0]);
        let err = read_dataset_from(line.as_bytes(), Validation::Full).unwrap_err();
        assert!(matches!(err, DatasetError::Invariant { line: 1, .. }), "{err}");
        // Structural validation does not re-solve.
        assert!(read_dataset_from(line.as_bytes(), Validation::Structural).is_ok());
    }

    #[test]
    fn tampered_prompt_rejected() {
        let mut items = sample(1);
        items[0].prompt.push('!');
        let line = to_jsonl_line(&items[0]);
        assert!(read_dataset_from(line.as_bytes(), Validation::Structural).is_err());
    }

    #[test]
    fn jsonl_field_names_are_fixed() {
        let line = to_jsonl_line(&sample(1)[0]);
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["complexity", "family", "id", "prompt", "schema_version", "seed", "spec", "truth"]);
        assert_eq!(v["spec"]["kind"], "counting");
    }
}
