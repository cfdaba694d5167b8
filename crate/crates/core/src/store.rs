//! Solution records and the line-delimited solution store.
//!
//! One JSON object per line. Appends write whole records with a single
//! `write_all` on a file opened in append mode, so concurrent appenders never
//! interleave partial lines. A trailing line without a newline is a record
//! cut off by a killed writer and is ignored on read.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::fol::{Clause, FreshNamer, HeadAssignment, Origin};
use crate::tptp::Problem;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("record {index}: {message}")]
    Parse { index: usize, message: String },
    #[error("record {index}: {message}")]
    Invalid { index: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("problem {problem} has no input clause named {parent}")]
    UnknownParent { problem: String, parent: String },
    #[error("instance of {parent}: {message}")]
    BadLevel { parent: String, message: String },
    #[error("instance of {parent} replays to `{got}`, record says `{expected}`")]
    Mismatch { parent: String, expected: String, got: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Unsat,
    Sat,
    Timeout,
    /// The attempt could not start, e.g. no constants to ground with.
    Skipped,
    /// The engine or solver failed; the message is in `reason`.
    Error,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Unsat => "unsat",
            Status::Sat => "sat",
            Status::Timeout => "timeout",
            Status::Skipped => "skipped",
            Status::Error => "error",
        };
        f.write_str(s)
    }
}

/// Which policy produced a record: `random` or `neural:<checkpoint>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PolicyTag {
    Random,
    Neural(String),
}

impl fmt::Display for PolicyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyTag::Random => f.write_str("random"),
            PolicyTag::Neural(ck) => write!(f, "neural:{ck}"),
        }
    }
}

impl Serialize for PolicyTag {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PolicyTag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "random" => Ok(PolicyTag::Random),
            other => match other.strip_prefix("neural") {
                Some(rest) => Ok(PolicyTag::Neural(rest.trim_start_matches(':').to_string())),
                None => Err(serde::de::Error::custom(format!("unknown policy `{other}`"))),
            },
        }
    }
}

/// One level of an instance derivation: variable name (`X0`, `X1`, ... by
/// ordinal in the clause at that level) to head symbol name, in variable order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LevelAssignment(pub Vec<(String, String)>);

impl LevelAssignment {
    pub fn from_heads(a: &HeadAssignment) -> Self {
        Self(a.heads.iter().enumerate().map(|(i, h)| (format!("X{i}"), h.name().to_string())).collect())
    }

    pub fn symbols(&self) -> Vec<&str> {
        self.0.iter().map(|(_, s)| s.as_str()).collect()
    }
}

impl Serialize for LevelAssignment {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for LevelAssignment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = LevelAssignment;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map from variable names to symbol names")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, String>()? {
                    out.push((k, v));
                }
                // order by ordinal so that readers that reorder keys still replay
                out.sort_by_key(|(k, _)| k.trim_start_matches('X').parse::<usize>().unwrap_or(usize::MAX));
                Ok(LevelAssignment(out))
            }
        }
        d.deserialize_map(V)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub parent: String,
    pub levels: Vec<LevelAssignment>,
    pub ground_clause: String,
}

impl InstanceRecord {
    /// Record for an instance clause; `None` for input clauses.
    pub fn from_clause(clause: &Clause) -> Option<Self> {
        match &clause.origin {
            Origin::Input => None,
            Origin::Instance { parent, steps } => Some(Self {
                parent: parent.to_string(),
                levels: steps.iter().map(LevelAssignment::from_heads).collect(),
                ground_clause: clause.formula_text(),
            }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptStats {
    pub ground_clauses: usize,
    pub max_instances_per_clause: usize,
    pub pass1_instances: usize,
    pub models: u64,
    pub blocking_clauses: u64,
    pub cc_merges: u64,
    pub conflicts: u64,
    pub core_size: usize,
    pub minimization_checks: usize,
    pub minimal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub problem: String,
    #[serde(default)]
    pub run: u64,
    pub status: Status,
    pub policy: PolicyTag,
    pub seed: u64,
    pub wall_time_s: f64,
    #[serde(default)]
    pub instances: Vec<InstanceRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<AttemptStats>,
}

impl SolutionRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.status != Status::Unsat && !self.instances.is_empty() {
            return Err(format!("status {} must not carry instances", self.status));
        }
        if self.problem.is_empty() {
            return Err("empty problem name".into());
        }
        Ok(())
    }

    pub fn is_solved(&self) -> bool {
        self.status == Status::Unsat
    }
}

pub fn write_solution(record: &SolutionRecord) -> Vec<u8> {
    let mut line = serde_json::to_vec(record).expect("records always serialize");
    line.push(b'\n');
    line
}

pub fn read_solution(bytes: &[u8]) -> Result<SolutionRecord, StoreError> {
    parse_line(bytes, 0)
}

fn parse_line(bytes: &[u8], index: usize) -> Result<SolutionRecord, StoreError> {
    let record: SolutionRecord = serde_json::from_slice(bytes)
        .map_err(|e| StoreError::Parse { index, message: e.to_string() })?;
    record.validate().map_err(|message| StoreError::Invalid { index, message })?;
    Ok(record)
}

/// Parses a whole store. A final line lacking its newline that does not parse
/// is treated as a torn write and dropped.
pub fn read_store(text: &str) -> Result<Vec<SolutionRecord>, StoreError> {
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line.as_bytes(), i) {
            Ok(r) => out.push(r),
            Err(e) if i + 1 == lines.len() && !complete => {
                log::warn!("ignoring torn final store line: {e}");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SolutionStore {
    path: PathBuf,
}

impl SolutionStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn io(&self, source: std::io::Error) -> StoreError {
        StoreError::Io { path: self.path.display().to_string(), source }
    }

    /// Appends records as one write.
    pub fn append(&self, records: &[SolutionRecord]) -> Result<(), StoreError> {
        if records.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        for r in records {
            buf.extend(write_solution(r));
        }
        self.repair_torn_tail()?;
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path).map_err(|e| self.io(e))?;
        f.write_all(&buf).map_err(|e| self.io(e))?;
        f.flush().map_err(|e| self.io(e))
    }

    /// Cuts a final line that lacks its newline so appends start on a fresh line.
    fn repair_torn_tail(&self) -> Result<(), StoreError> {
        let Ok(bytes) = std::fs::read(&self.path) else { return Ok(()) };
        if bytes.is_empty() || bytes.ends_with(b"\n") {
            return Ok(());
        }
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        let f = OpenOptions::new().write(true).open(&self.path).map_err(|e| self.io(e))?;
        f.set_len(keep as u64).map_err(|e| self.io(e))
    }

    pub fn read_all(&self) -> Result<Vec<SolutionRecord>, StoreError> {
        match std::fs::read_to_string(&self.path) {
            Ok(text) => read_store(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(self.io(e)),
        }
    }
}

/// Per-run solved counts and the running union, by run index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CumulativeRow {
    pub run: u64,
    pub attempted: usize,
    pub solved: usize,
    pub cumulative: usize,
}

pub fn cumulative_counts(records: &[SolutionRecord]) -> Vec<CumulativeRow> {
    let mut by_run: BTreeMap<u64, (BTreeSet<&str>, BTreeSet<&str>)> = BTreeMap::new();
    for r in records {
        let entry = by_run.entry(r.run).or_default();
        entry.0.insert(&r.problem);
        if r.is_solved() {
            entry.1.insert(&r.problem);
        }
    }
    let mut union: BTreeSet<&str> = BTreeSet::new();
    by_run
        .into_iter()
        .map(|(run, (attempted, solved))| {
            union.extend(solved.iter().copied());
            CumulativeRow { run, attempted: attempted.len(), solved: solved.len(), cumulative: union.len() }
        })
        .collect()
}

/// Re-derives every instance of a record from its input clause and checks
/// that the result is the stored ground clause.
pub fn replay_instances(record: &SolutionRecord, problem: &Problem) -> Result<Vec<Clause>, ReplayError> {
    record
        .instances
        .iter()
        .map(|inst| {
            let parent = problem.clause(&inst.parent).ok_or_else(|| ReplayError::UnknownParent {
                problem: problem.name.clone(),
                parent: inst.parent.clone(),
            })?;
            let mut clause = parent.clone();
            for level in &inst.levels {
                let heads = level
                    .symbols()
                    .into_iter()
                    .map(|name| {
                        problem.signature.function(name).cloned().ok_or_else(|| ReplayError::BadLevel {
                            parent: inst.parent.clone(),
                            message: format!("unknown function symbol {name}"),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let mut namer = FreshNamer::for_clause(&clause);
                clause = clause
                    .deepen(&HeadAssignment::new(heads), &mut namer)
                    .map_err(|e| ReplayError::BadLevel { parent: inst.parent.clone(), message: e.to_string() })?;
            }
            let got = clause.formula_text();
            if got != inst.ground_clause || !clause.is_ground() {
                return Err(ReplayError::Mismatch {
                    parent: inst.parent.clone(),
                    expected: inst.ground_clause.clone(),
                    got,
                });
            }
            Ok(clause)
        })
        .collect()
}
