//! Experiment drivers: dataset split, attempts, sweeps, the self-improvement
//! loop, coverage evaluation and reports.

pub mod coverage;
pub mod looping;
pub mod report;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{two_pass_ground, EngineError, ExternalPolicy, PassConfig, Policy, RandomPolicy};
use crate::fol::Origin;
use crate::solver::{decide_ground, minimize_core, Budget, GroundVerdict, DEFAULT_BUDGET_SECS};
use crate::store::{
    cumulative_counts, AttemptStats, CumulativeRow, InstanceRecord, PolicyTag, SolutionRecord, SolutionStore,
    Status, StoreError,
};
use crate::tptp::Problem;

pub use coverage::{coverage_eval, CoverageTable};
pub use looping::{self_improve_loop, LoopConfig, LoopState, RemotePolicy, TrainablePolicy};
pub use report::{write_report, Report};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("need at least 3 problem families to split, found {0}")]
    TooFewFamilies(usize),
    #[error("problem {problem}: {count} ground instances from one input clause exceeds the bound {bound}")]
    InstanceBound { problem: String, count: usize, bound: usize },
    #[error("refusing to train on test-family problem {0}")]
    Leakage(String),
    #[error("policy connection lost: {0}")]
    PolicyLost(EngineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{path}: {message}")]
    State { path: String, message: String },
}

/// Which part of a split a family belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: BTreeSet<String>,
    pub dev: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn part_of(&self, family: &str) -> Option<Part> {
        if self.train.contains(family) {
            Some(Part::Train)
        } else if self.dev.contains(family) {
            Some(Part::Dev)
        } else if self.test.contains(family) {
            Some(Part::Test)
        } else {
            None
        }
    }

    pub fn select<'a>(&self, problems: &'a [Problem], part: Part) -> Vec<&'a Problem> {
        problems.iter().filter(|p| self.part_of(&p.family) == Some(part)).collect()
    }
}

/// `percent` of `n`, rounded half up.
fn share(n: usize, percent: usize) -> usize {
    (n * percent + 50) / 100
}

/// 10% of families for test and 5% of the rest for dev, each at least one.
pub fn split_dataset(problems: &[Problem], seed: u64) -> Result<DatasetSplit, PipelineError> {
    let families: BTreeSet<&str> = problems.iter().map(|p| p.family.as_str()).collect();
    let n = families.len();
    if n < 3 {
        return Err(PipelineError::TooFewFamilies(n));
    }
    let mut order: Vec<&str> = families.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = share(n, 10).max(1);
    let dev = share(n - test, 5).max(1);
    let take = |r: std::ops::Range<usize>| order[r].iter().map(|s| s.to_string()).collect();
    Ok(DatasetSplit { test: take(0..test), dev: take(test..test + dev), train: take(test + dev..n), seed })
}

/// Seed for one attempt: SHA-256 over the base seed, run index and problem name.
pub fn attempt_seed(base: u64, run: u64, problem: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(run.to_le_bytes());
    h.update(problem.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttemptConfig {
    pub passes: PassConfig,
    pub budget_secs: f64,
    pub minimize: bool,
}

impl Default for AttemptConfig {
    fn default() -> Self {
        Self { passes: PassConfig::random(), budget_secs: DEFAULT_BUDGET_SECS, minimize: true }
    }
}

/// Where per-attempt policies come from.
#[derive(Clone)]
pub enum PolicySource {
    Random,
    External { client: ExternalPolicy, checkpoint: String },
}

impl PolicySource {
    pub fn tag(&self) -> PolicyTag {
        match self {
            PolicySource::Random => PolicyTag::Random,
            PolicySource::External { checkpoint, .. } => PolicyTag::Neural(checkpoint.clone()),
        }
    }

    pub fn policy(&self, seed: u64) -> Box<dyn Policy + Send> {
        match self {
            PolicySource::Random => Box::new(RandomPolicy::new(seed)),
            PolicySource::External { client, .. } => Box::new(client.with_seed(seed)),
        }
    }

    /// Default pass settings: random grounding uses constants only.
    pub fn passes(&self) -> PassConfig {
        match self {
            PolicySource::Random => PassConfig::random(),
            PolicySource::External { .. } => PassConfig::external(),
        }
    }
}

fn is_connection_error(e: &EngineError) -> bool {
    matches!(e, EngineError::Transport(_) | EngineError::Timeout)
}

/// Like [`run_attempt`], but hands back connection failures instead of
/// recording them.
pub fn try_attempt(
    problem: &Problem,
    policy: &mut dyn Policy,
    tag: PolicyTag,
    seed: u64,
    run: u64,
    config: &AttemptConfig,
) -> Result<SolutionRecord, EngineError> {
    let start = Instant::now();
    let mut record = SolutionRecord {
        problem: problem.name.clone(),
        run,
        status: Status::Error,
        policy: tag,
        seed,
        wall_time_s: 0.0,
        instances: Vec::new(),
        reason: None,
        stats: None,
    };
    let finish = |mut r: SolutionRecord| {
        r.wall_time_s = start.elapsed().as_secs_f64();
        r
    };
    let grounding = match two_pass_ground(problem, policy, &config.passes) {
        Ok(g) => g,
        Err(e) if is_connection_error(&e) => return Err(e),
        Err(e) => {
            record.status = if e.is_skip() { Status::Skipped } else { Status::Error };
            record.reason = Some(e.to_string());
            return Ok(finish(record));
        }
    };
    let mut stats = AttemptStats {
        ground_clauses: grounding.clauses.len(),
        max_instances_per_clause: grounding.max_per_input(),
        pass1_instances: grounding.pass1_instances,
        ..AttemptStats::default()
    };
    let budget = Budget::seconds(config.budget_secs);
    let outcome = match decide_ground(&grounding.clauses, budget) {
        Ok(o) => o,
        Err(e) => {
            record.reason = Some(e.to_string());
            record.stats = Some(stats);
            return Ok(finish(record));
        }
    };
    stats.models = outcome.stats.models;
    stats.blocking_clauses = outcome.stats.blocking_clauses;
    stats.cc_merges = outcome.stats.cc_merges;
    stats.conflicts = outcome.stats.conflicts;
    match outcome.verdict {
        GroundVerdict::Sat { .. } => record.status = Status::Sat,
        GroundVerdict::Timeout => record.status = Status::Timeout,
        GroundVerdict::Unsat { core } => {
            record.status = Status::Unsat;
            let inputs: BTreeSet<usize> = (0..grounding.clauses.len())
                .filter(|&i| matches!(grounding.clauses[i].origin, Origin::Input))
                .collect();
            let mut core: Vec<usize> = core.into_iter().chain(inputs.iter().copied()).collect();
            core.sort_unstable();
            core.dedup();
            if config.minimize {
                match minimize_core(&grounding.clauses, &core, &inputs, budget) {
                    Ok(m) => {
                        stats.minimal = m.minimal;
                        stats.minimization_checks = m.checks;
                        core = m.core;
                    }
                    Err(e) => log::warn!("{}: minimization failed: {e}", problem.name),
                }
            }
            record.instances = core.iter().filter_map(|&i| InstanceRecord::from_clause(&grounding.clauses[i])).collect();
            stats.core_size = record.instances.len();
        }
    }
    record.stats = Some(stats);
    Ok(finish(record))
}

/// One grounding-and-solving attempt. Failures become the record's status.
pub fn run_attempt(
    problem: &Problem,
    policy: &mut dyn Policy,
    tag: PolicyTag,
    seed: u64,
    run: u64,
    config: &AttemptConfig,
) -> SolutionRecord {
    try_attempt(problem, policy, tag.clone(), seed, run, config).unwrap_or_else(|e| SolutionRecord {
        problem: problem.name.clone(),
        run,
        status: Status::Error,
        policy: tag,
        seed,
        wall_time_s: 0.0,
        instances: Vec::new(),
        reason: Some(e.to_string()),
        stats: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub runs: u64,
    pub base_seed: u64,
    pub attempt: AttemptConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<CumulativeRow>,
    pub attempts: usize,
    pub max_instances_per_clause: usize,
    pub instance_bound: usize,
}

/// Attempts every problem in each of `runs` seeded runs (numbered from 1),
/// appending each run's records to the store in problem order. Pairs already
/// in the store are skipped, so an interrupted sweep resumes where it stopped.
pub fn sweep(
    problems: &[Problem],
    source: &PolicySource,
    config: &SweepConfig,
    store: &SolutionStore,
) -> Result<SweepReport, PipelineError> {
    let bound = config.attempt.passes.instance_bound();
    let existing = store.read_all()?;
    let done: HashSet<(u64, String)> = existing.iter().map(|r| (r.run, r.problem.clone())).collect();
    let mut attempts = 0;
    let mut max_seen = existing.iter().filter_map(|r| r.stats.as_ref()).map(|s| s.max_instances_per_clause).max().unwrap_or(0);
    for run in 1..=config.runs {
        let todo: Vec<&Problem> = problems.iter().filter(|p| !done.contains(&(run, p.name.clone()))).collect();
        let records: Vec<SolutionRecord> = todo
            .par_iter()
            .map(|p| {
                let seed = attempt_seed(config.base_seed, run, &p.name);
                let mut policy = source.policy(seed);
                run_attempt(p, &mut policy, source.tag(), seed, run, &config.attempt)
            })
            .collect();
        for r in &records {
            let count = r.stats.as_ref().map_or(0, |s| s.max_instances_per_clause);
            if count > bound {
                return Err(PipelineError::InstanceBound { problem: r.problem.clone(), count, bound });
            }
            max_seen = max_seen.max(count);
        }
        attempts += records.len();
        store.append(&records)?;
        let solved = records.iter().filter(|r| r.is_solved()).count();
        log::info!("run {run}: {solved}/{} newly attempted problems solved", records.len());
    }
    let all = store.read_all()?;
    Ok(SweepReport { rows: cumulative_counts(&all), attempts, max_instances_per_clause: max_seen, instance_bound: bound })
}

/// Solved records grouped by problem.
pub fn solved_by_problem(records: &[SolutionRecord]) -> BTreeMap<String, Vec<SolutionRecord>> {
    let mut out: BTreeMap<String, Vec<SolutionRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_solved()) {
        out.entry(r.problem.clone()).or_default().push(r.clone());
    }
    out
}
