//! The self-improvement loop: attempt training problems with the learned
//! policy, keep every proof found, train on a random sample of them, repeat.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{EngineError, ExternalPolicy, Policy};
use crate::pipeline::{attempt_seed, try_attempt, AttemptConfig, DatasetSplit, Part, PipelineError};
use crate::store::{PolicyTag, SolutionRecord, SolutionStore};
use crate::tptp::Problem;

/// A policy that can also be trained and reinitialized.
pub trait TrainablePolicy: Sync {
    /// A policy for one attempt.
    fn policy(&self, seed: u64) -> Box<dyn Policy + Send>;

    fn tag(&self) -> PolicyTag;

    /// Trains in place; returns the new checkpoint reference.
    fn train(&mut self, records: &[SolutionRecord], problems: &[&Problem], steps: usize) -> Result<String, EngineError>;

    /// Reinitializes the model parameters.
    fn reset(&mut self) -> Result<(), EngineError>;
}

/// A policy server reached over the wire protocol.
pub struct RemotePolicy {
    client: ExternalPolicy,
    checkpoint: String,
}

impl RemotePolicy {
    pub fn new(client: ExternalPolicy, checkpoint: impl Into<String>) -> Self {
        Self { client, checkpoint: checkpoint.into() }
    }
}

impl TrainablePolicy for RemotePolicy {
    fn policy(&self, seed: u64) -> Box<dyn Policy + Send> {
        Box::new(self.client.with_seed(seed))
    }

    fn tag(&self) -> PolicyTag {
        PolicyTag::Neural(self.checkpoint.clone())
    }

    fn train(&mut self, records: &[SolutionRecord], problems: &[&Problem], steps: usize) -> Result<String, EngineError> {
        let ack = self.client.train(records, problems, steps)?;
        if let Some(ck) = ack.checkpoint {
            self.checkpoint = ck;
        }
        Ok(self.checkpoint.clone())
    }

    fn reset(&mut self) -> Result<(), EngineError> {
        let ack = self.client.reset()?;
        self.checkpoint = ack.checkpoint.unwrap_or_else(|| "fresh".into());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub iteration: u64,
    pub attempted: usize,
    pub solved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopState {
    /// Number of completed iterations.
    pub iteration: u64,
    pub solved: BTreeMap<String, Vec<SolutionRecord>>,
    pub attempts_per_iter: usize,
    pub train_samples_per_iter: usize,
    pub checkpoint: Option<String>,
    #[serde(default)]
    pub restarts: u64,
    #[serde(default)]
    pub evals: Vec<EvalPoint>,
}

impl LoopState {
    pub fn new(attempts_per_iter: usize, train_samples_per_iter: usize) -> Self {
        Self {
            iteration: 0,
            solved: BTreeMap::new(),
            attempts_per_iter,
            train_samples_per_iter,
            checkpoint: None,
            restarts: 0,
            evals: Vec::new(),
        }
    }

    pub fn solved_count(&self) -> usize {
        self.solved.len()
    }

    pub fn load(path: &Path) -> Result<Option<Self>, PipelineError> {
        let err = |message: String| PipelineError::State { path: path.display().to_string(), message };
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| err(e.to_string())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(err(e.to_string())),
        }
    }

    /// Writes to a sibling temp file and renames it over `path`.
    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let err = |message: String| PipelineError::State { path: path.display().to_string(), message };
        let tmp = path.with_extension("tmp");
        let text = serde_json::to_string_pretty(self).map_err(|e| err(e.to_string()))?;
        std::fs::write(&tmp, text).map_err(|e| err(e.to_string()))?;
        std::fs::rename(&tmp, path).map_err(|e| err(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub iterations: u64,
    pub eval_every: u64,
    pub train_steps: usize,
    pub base_seed: u64,
    pub attempt: AttemptConfig,
    pub restart_fresh_model: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            iterations: 1,
            eval_every: 10,
            train_steps: 1,
            base_seed: 0,
            attempt: AttemptConfig { passes: crate::engine::PassConfig::external(), ..AttemptConfig::default() },
            restart_fresh_model: false,
        }
    }
}

fn attempt_all(
    problems: &[&Problem],
    policy: &dyn TrainablePolicy,
    base_seed: u64,
    iteration: u64,
    config: &AttemptConfig,
) -> Result<Vec<SolutionRecord>, EngineError> {
    problems
        .par_iter()
        .map(|p| {
            let seed = attempt_seed(base_seed, iteration, &p.name);
            let mut pol = policy.policy(seed);
            try_attempt(p, &mut pol, policy.tag(), seed, iteration, config)
        })
        .collect()
}

/// Runs `config.iterations` more iterations from `state`, saving it after each
/// one. New solutions also go to `store` when given. A lost policy connection
/// saves the state as of the last completed iteration and returns
/// [`PipelineError::PolicyLost`]; running again resumes from there.
pub fn self_improve_loop(
    mut state: LoopState,
    problems: &[Problem],
    split: &DatasetSplit,
    policy: &mut dyn TrainablePolicy,
    config: &LoopConfig,
    state_path: Option<&Path>,
    store: Option<&SolutionStore>,
) -> Result<LoopState, PipelineError> {
    let save = |s: &LoopState| state_path.map_or(Ok(()), |p| s.save(p));
    let lost = |s: &LoopState, e: EngineError| {
        save(s)?;
        Err(PipelineError::PolicyLost(e))
    };
    if config.restart_fresh_model {
        if let Err(e) = policy.reset() {
            return lost(&state, e);
        }
        state.restarts += 1;
        state.checkpoint = None;
        log::info!("restarted with a fresh model; {} solved problems kept", state.solved_count());
        save(&state)?;
    }
    let train = split.select(problems, Part::Train);
    let test = split.select(problems, Part::Test);
    let by_name: BTreeMap<&str, &Problem> = problems.iter().map(|p| (p.name.as_str(), p)).collect();
    for _ in 0..config.iterations {
        let iteration = state.iteration + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(attempt_seed(config.base_seed, iteration, "\0loop"));
        let k = state.attempts_per_iter.min(train.len());
        let mut picked: Vec<usize> = index::sample(&mut rng, train.len(), k).into_vec();
        picked.sort_unstable();
        let chosen: Vec<&Problem> = picked.iter().map(|&i| train[i]).collect();
        let records = match attempt_all(&chosen, policy, config.base_seed, iteration, &config.attempt) {
            Ok(r) => r,
            Err(e) => return lost(&state, e),
        };
        let fresh: Vec<SolutionRecord> = records.into_iter().filter(SolutionRecord::is_solved).collect();
        if let Some(store) = store {
            store.append(&fresh)?;
        }
        let mut next = state.clone();
        for r in fresh {
            next.solved.entry(r.problem.clone()).or_default().push(r);
        }

        let pool: Vec<&SolutionRecord> = next.solved.values().flatten().collect();
        if !pool.is_empty() && next.train_samples_per_iter > 0 {
            let batch: Vec<SolutionRecord> =
                (0..next.train_samples_per_iter).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect();
            let mut names: Vec<&str> = batch.iter().map(|r| r.problem.as_str()).collect();
            names.sort_unstable();
            names.dedup();
            let mut sent = Vec::with_capacity(names.len());
            for name in &names {
                let p = by_name.get(name).ok_or_else(|| PipelineError::Leakage(name.to_string()))?;
                if split.part_of(&p.family) != Some(Part::Train) {
                    return Err(PipelineError::Leakage(name.to_string()));
                }
                sent.push(*p);
            }
            log::info!("iteration {iteration}: training on {} records from {names:?}", batch.len());
            match policy.train(&batch, &sent, config.train_steps) {
                Ok(ck) => next.checkpoint = Some(ck),
                Err(e) => return lost(&state, e),
            }
        }

        if config.eval_every > 0 && iteration.is_multiple_of(config.eval_every) {
            let records = match attempt_all(&test, policy, config.base_seed, iteration, &config.attempt) {
                Ok(r) => r,
                Err(e) => return lost(&state, e),
            };
            let solved = records.iter().filter(|r| r.is_solved()).count();
            log::info!("iteration {iteration}: test set {solved}/{}", records.len());
            next.evals.push(EvalPoint { iteration, attempted: records.len(), solved });
        }
        next.iteration = iteration;
        state = next;
        save(&state)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RandomPolicy;
    use crate::pipeline::split_dataset;
    use crate::tptp::parse_cnf;
    use std::sync::{Arc, Mutex};

    /// Random proposals; records every training call.
    #[derive(Default)]
    struct Recorder {
        trained: Arc<Mutex<Vec<String>>>,
        resets: usize,
        fail_train: bool,
    }

    impl TrainablePolicy for Recorder {
        fn policy(&self, seed: u64) -> Box<dyn Policy + Send> {
            Box::new(RandomPolicy::new(seed))
        }
        fn tag(&self) -> PolicyTag {
            PolicyTag::Neural("rec".into())
        }
        fn train(&mut self, records: &[SolutionRecord], problems: &[&Problem], _: usize) -> Result<String, EngineError> {
            if self.fail_train {
                return Err(EngineError::Transport("gone".into()));
            }
            let mut t = self.trained.lock().unwrap();
            t.extend(records.iter().map(|r| r.problem.clone()));
            assert!(records.iter().all(|r| problems.iter().any(|p| p.name == r.problem)));
            Ok(format!("ck{}", t.len()))
        }
        fn reset(&mut self) -> Result<(), EngineError> {
            self.resets += 1;
            Ok(())
        }
    }

    fn corpus() -> Vec<Problem> {
        (0..12)
            .map(|i| {
                let mut p = parse_cnf(&format!("cnf(a, axiom, ~q(X)).\ncnf(b, axiom, q(k{i})).")).unwrap();
                p.name = format!("fam{i}__x");
                p.family = format!("fam{i}");
                p
            })
            .collect()
    }

    fn config(iterations: u64) -> LoopConfig {
        LoopConfig { iterations, eval_every: 2, ..LoopConfig::default() }
    }

    #[test]
    fn zero_attempts_only_advance_the_counter() {
        let problems = corpus();
        let split = split_dataset(&problems, 1).unwrap();
        let mut pol = Recorder::default();
        let s = self_improve_loop(LoopState::new(0, 5), &problems, &split, &mut pol, &config(3), None, None).unwrap();
        assert_eq!(s.iteration, 3);
        assert!(s.solved.is_empty());
        assert!(pol.trained.lock().unwrap().is_empty());
    }

    #[test]
    fn never_trains_on_test_families_and_grows_monotonically() {
        let problems = corpus();
        let split = split_dataset(&problems, 1).unwrap();
        let mut pol = Recorder::default();
        let mut state = LoopState::new(4, 6);
        let mut last = 0;
        for _ in 0..4 {
            state = self_improve_loop(state, &problems, &split, &mut pol, &config(1), None, None).unwrap();
            assert!(state.solved_count() >= last);
            last = state.solved_count();
        }
        assert!(last > 0);
        for name in pol.trained.lock().unwrap().iter() {
            let fam = crate::tptp::family_of(name);
            assert_eq!(split.part_of(fam), Some(Part::Train), "{name}");
        }
        assert_eq!(state.evals.len(), 2);
        assert!(state.evals.iter().all(|e| e.attempted == split.test.len()));
    }

    #[test]
    fn restart_keeps_solutions() {
        let problems = corpus();
        let split = split_dataset(&problems, 1).unwrap();
        let mut pol = Recorder::default();
        let s = self_improve_loop(LoopState::new(9, 3), &problems, &split, &mut pol, &config(1), None, None).unwrap();
        let before = s.solved.clone();
        let cfg = LoopConfig { restart_fresh_model: true, iterations: 0, ..config(0) };
        let s = self_improve_loop(s, &problems, &split, &mut pol, &cfg, None, None).unwrap();
        assert_eq!(pol.resets, 1);
        assert_eq!(s.solved, before);
        assert_eq!(s.checkpoint, None);
        assert_eq!(s.restarts, 1);
    }

    #[test]
    fn lost_connection_saves_resumable_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loop.json");
        let problems = corpus();
        let split = split_dataset(&problems, 1).unwrap();
        let mut good = Recorder::default();
        let s = self_improve_loop(LoopState::new(9, 3), &problems, &split, &mut good, &config(1), Some(&path), None).unwrap();
        let mut bad = Recorder { fail_train: true, ..Recorder::default() };
        let err = self_improve_loop(s.clone(), &problems, &split, &mut bad, &config(2), Some(&path), None).unwrap_err();
        assert!(matches!(err, PipelineError::PolicyLost(_)));
        let saved = LoopState::load(&path).unwrap().unwrap();
        assert_eq!(saved, s);
        let resumed = self_improve_loop(saved, &problems, &split, &mut good, &config(1), Some(&path), None).unwrap();
        assert_eq!(resumed.iteration, 2);
    }
}
