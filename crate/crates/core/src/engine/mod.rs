//! Two-pass leveled grounding driven by a head-symbol policy.
//!
//! Pass one deepens every input clause with `level0_samples` proposals. The
//! input of pass two is the deduplicated union of the original clauses and
//! the pass-one instances; pass two grounds it with `level1_samples`
//! proposals. Only ground clauses are kept.

pub mod protocol;
pub mod random;
pub mod server;

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::fol::{CanonicalKey, Clause, FolError, FreshNamer, HeadAssignment, Signature};
use crate::tptp::Problem;

pub use protocol::{Endpoint, ExternalPolicy};
pub use random::{random_assignment, AssignmentMode, RandomPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("no constants available to ground clause {clause}")]
    NoConstants { clause: String },
    #[error("no function symbols available to instantiate clause {clause}")]
    NoFunctions { clause: String },
    #[error("policy protocol error on clause {clause}: {message}")]
    Protocol { clause: String, message: String },
    #[error("policy transport failure: {0}")]
    Transport(String),
    #[error("policy timed out")]
    Timeout,
    #[error("malformed policy response: {0}")]
    Malformed(String),
    #[error(transparent)]
    Fol(#[from] FolError),
}

impl EngineError {
    /// Errors that mean "this problem cannot be attempted" rather than a failure.
    pub fn is_skip(&self) -> bool {
        matches!(self, EngineError::NoConstants { .. } | EngineError::NoFunctions { .. })
    }
}

/// One policy output for one clause.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Proposal {
    /// Do not instantiate this clause.
    Stop,
    Assign(HeadAssignment),
}

/// What the engine asks of a policy for one pass.
#[derive(Debug, Clone, Copy)]
pub struct PolicyRequest<'a> {
    pub problem: &'a str,
    pub clauses: &'a [Clause],
    pub signature: &'a Signature,
    /// 0 for the deepening pass, 1 for the grounding pass.
    pub level: usize,
    pub samples: usize,
    /// Indices into `clauses` that need proposals; all are non-ground.
    pub targets: &'a [usize],
    pub constants_only: bool,
}

pub trait Policy {
    /// One list of proposals per target, in target order.
    fn propose(&mut self, request: &PolicyRequest<'_>) -> Result<Vec<Vec<Proposal>>, EngineError>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn propose(&mut self, request: &PolicyRequest<'_>) -> Result<Vec<Vec<Proposal>>, EngineError> {
        (**self).propose(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassConfig {
    pub level0_samples: usize,
    pub level1_samples: usize,
    pub grounding_pass_constants_only: bool,
}

impl Default for PassConfig {
    fn default() -> Self {
        Self::random()
    }
}

impl PassConfig {
    /// 25 deepening and 5 grounding samples, grounding with constants only.
    pub fn random() -> Self {
        Self { level0_samples: 25, level1_samples: 5, grounding_pass_constants_only: true }
    }

    /// Same sample counts; the policy is not forced to propose constants when grounding.
    pub fn external() -> Self {
        Self { grounding_pass_constants_only: false, ..Self::random() }
    }

    pub fn with_samples(self, level0: usize, level1: usize) -> Self {
        Self { level0_samples: level0, level1_samples: level1, ..self }
    }

    /// Upper bound on ground instances attributed to one input clause.
    pub fn instance_bound(&self) -> usize {
        (self.level0_samples + 1) * self.level1_samples.max(1)
    }
}

/// Hands out clause names not used before in one grounding.
#[derive(Debug, Default)]
struct Names {
    used: HashSet<String>,
}

impl Names {
    fn new(clauses: &[Clause]) -> Self {
        Self { used: clauses.iter().map(|c| c.name.to_string()).collect() }
    }

    fn fresh(&mut self, base: &str) -> String {
        let mut k = self.used.len();
        loop {
            let name = format!("{base}_i{k}");
            if self.used.insert(name.clone()) {
                return name;
            }
            k += 1;
        }
    }
}

/// Applies one pass of policy proposals to `clauses`, returning new instances
/// deduplicated up to variable renaming, in proposal order.
pub fn expand_pass(
    problem: &str,
    clauses: &[Clause],
    signature: &Signature,
    policy: &mut dyn Policy,
    level: usize,
    samples: usize,
    constants_only: bool,
) -> Result<Vec<Clause>, EngineError> {
    let mut names = Names::new(clauses);
    expand_with_names(problem, clauses, signature, policy, level, samples, constants_only, &mut names)
}

#[allow(clippy::too_many_arguments)]
fn expand_with_names(
    problem: &str,
    clauses: &[Clause],
    signature: &Signature,
    policy: &mut dyn Policy,
    level: usize,
    samples: usize,
    constants_only: bool,
    names: &mut Names,
) -> Result<Vec<Clause>, EngineError> {
    let targets: Vec<usize> = (0..clauses.len()).filter(|&i| !clauses[i].is_ground()).collect();
    if samples == 0 || targets.is_empty() {
        return Ok(Vec::new());
    }
    let request = PolicyRequest { problem, clauses, signature, level, samples, targets: &targets, constants_only };
    let proposals = policy.propose(&request)?;
    if proposals.len() != targets.len() {
        return Err(EngineError::Malformed(format!(
            "{} proposal lists for {} clauses",
            proposals.len(),
            targets.len()
        )));
    }
    let mut seen: HashSet<CanonicalKey> = HashSet::new();
    let mut out = Vec::new();
    for (&ti, list) in targets.iter().zip(proposals) {
        let clause = &clauses[ti];
        if list.len() > samples {
            log::warn!("clause {}: {} proposals for {samples} samples, truncating", clause.name, list.len());
        }
        for proposal in list.into_iter().take(samples) {
            let Proposal::Assign(assignment) = proposal else { continue };
            check_assignment(clause, signature, &assignment, constants_only)?;
            let mut namer = FreshNamer::for_clause(clause);
            let instance = clause.deepen(&assignment, &mut namer).map_err(|e| EngineError::Protocol {
                clause: clause.name.to_string(),
                message: e.to_string(),
            })?;
            if seen.insert(instance.canonical_key()) {
                let name = names.fresh(instance.root());
                out.push(instance.with_name(&name));
            }
        }
    }
    Ok(out)
}

fn check_assignment(
    clause: &Clause,
    signature: &Signature,
    assignment: &HeadAssignment,
    constants_only: bool,
) -> Result<(), EngineError> {
    let protocol = |message: String| EngineError::Protocol { clause: clause.name.to_string(), message };
    for head in &assignment.heads {
        if signature.function(head.name()) != Some(head) {
            return Err(protocol(format!("{head:?} is not a function symbol of the problem")));
        }
        if constants_only && !head.is_constant() {
            return Err(protocol(format!("{head:?} is not a constant")));
        }
    }
    Ok(())
}

/// The ground clause set produced for one problem, with provenance on every
/// instance clause.
#[derive(Debug, Clone)]
pub struct Grounding {
    pub clauses: Vec<Clause>,
    pub pass1_instances: usize,
    pub pass2_inputs: usize,
    /// Ground clauses attributed to each input clause (by root name).
    pub per_input: BTreeMap<String, usize>,
}

impl Grounding {
    pub fn max_per_input(&self) -> usize {
        self.per_input.values().copied().max().unwrap_or(0)
    }
}

fn dedup(clauses: impl IntoIterator<Item = Clause>) -> Vec<Clause> {
    let mut seen = HashSet::new();
    clauses.into_iter().filter(|c| seen.insert(c.canonical_key())).collect()
}

pub fn two_pass_ground(problem: &Problem, policy: &mut dyn Policy, config: &PassConfig) -> Result<Grounding, EngineError> {
    let mut names = Names::new(&problem.clauses);
    let pass1 = expand_with_names(
        &problem.name,
        &problem.clauses,
        &problem.signature,
        policy,
        0,
        config.level0_samples,
        false,
        &mut names,
    )?;
    let pass1_instances = pass1.len();
    let pass2_input = dedup(problem.clauses.iter().cloned().chain(pass1));
    let pass2 = expand_with_names(
        &problem.name,
        &pass2_input,
        &problem.signature,
        policy,
        1,
        config.level1_samples,
        config.grounding_pass_constants_only,
        &mut names,
    )?;
    let pass2_inputs = pass2_input.len();
    let clauses = dedup(pass2_input.into_iter().chain(pass2).filter(Clause::is_ground));
    let mut per_input = BTreeMap::new();
    for c in &clauses {
        *per_input.entry(c.root().to_string()).or_insert(0) += 1;
    }
    debug_assert!(clauses.iter().all(|c| c.level() <= crate::fol::MAX_LEVEL));
    Ok(Grounding { clauses, pass1_instances, pass2_inputs, per_input })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::Symbol;
    use crate::tptp::parse_cnf;

    /// Replays a fixed script of proposals, one entry per (level, clause name).
    struct Scripted(Vec<(usize, &'static str, Vec<Proposal>)>);

    impl Policy for Scripted {
        fn propose(&mut self, req: &PolicyRequest<'_>) -> Result<Vec<Vec<Proposal>>, EngineError> {
            Ok(req
                .targets
                .iter()
                .map(|&i| {
                    let c = &req.clauses[i];
                    self.0
                        .iter()
                        .filter(|(lvl, name, _)| *lvl == req.level && (c.root() == *name && c.level() == req.level))
                        .flat_map(|(_, _, p)| p.clone())
                        .collect()
                })
                .collect())
        }
    }

    fn fig1() -> Problem {
        parse_cnf("cnf(c1, axiom, ~p(f(X,Z))).\ncnf(c2, negated_conjecture, p(f(t(c,c),g(e)))).").unwrap()
    }

    fn assign(p: &Problem, names: &[&str]) -> Proposal {
        Proposal::Assign(HeadAssignment::new(
            names.iter().map(|n| p.signature.function(n).unwrap().clone()).collect(),
        ))
    }

    #[test]
    fn identical_proposals_collapse() {
        let p = fig1();
        let prop = assign(&p, &["t", "g"]);
        let mut policy = Scripted(vec![(0, "c1", vec![prop; 25])]);
        let out = expand_pass(&p.name, &p.clauses, &p.signature, &mut policy, 0, 25, false).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].formula_text(), "~p(f(t(X0,X1),g(X2)))");
        assert_eq!(out[0].root(), "c1");
    }

    #[test]
    fn all_stop_gives_nothing() {
        let p = fig1();
        let mut policy = Scripted(vec![(0, "c1", vec![Proposal::Stop; 5])]);
        let out = expand_pass(&p.name, &p.clauses, &p.signature, &mut policy, 0, 5, false).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn scripted_policy_reaches_the_target_instance() {
        let p = fig1();
        let mut policy = Scripted(vec![
            (0, "c1", vec![assign(&p, &["t", "g"])]),
            (1, "c1", vec![assign(&p, &["c", "c", "e"])]),
        ]);
        let g = two_pass_ground(&p, &mut policy, &PassConfig::random().with_samples(1, 1)).unwrap();
        let texts: Vec<String> = g.clauses.iter().map(Clause::formula_text).collect();
        assert!(texts.contains(&"~p(f(t(c,c),g(e)))".to_string()), "{texts:?}");
        assert!(texts.contains(&"p(f(t(c,c),g(e)))".to_string()));
        assert_eq!(g.clauses.len(), 2);
    }

    #[test]
    fn zero_samples_keep_only_ground_inputs() {
        let p = fig1();
        let mut policy = RandomPolicy::new(1);
        let g = two_pass_ground(&p, &mut policy, &PassConfig::random().with_samples(0, 0)).unwrap();
        assert_eq!(g.clauses.len(), 1);
        assert_eq!(&*g.clauses[0].name, "c2");
    }

    #[test]
    fn one_variable_over_three_constants() {
        let p = parse_cnf("cnf(a, axiom, q(X)). cnf(b, axiom, r(a,b,c)).").unwrap();
        let mut policy = RandomPolicy::new(3);
        let g = two_pass_ground(&p, &mut policy, &PassConfig::random()).unwrap();
        assert!(g.per_input["a"] <= 130);
        assert_eq!(g.per_input["a"], 3);
    }

    #[test]
    fn protocol_errors_name_the_clause() {
        let p = fig1();
        let bogus = Proposal::Assign(HeadAssignment::new(vec![Symbol::function("zz", 1), Symbol::function("g", 1)]));
        let mut policy = Scripted(vec![(0, "c1", vec![bogus])]);
        let err = expand_pass(&p.name, &p.clauses, &p.signature, &mut policy, 0, 1, false).unwrap_err();
        assert!(matches!(err, EngineError::Protocol { ref clause, .. } if clause == "c1"), "{err:?}");
        let short = assign(&p, &["t"]);
        let mut policy = Scripted(vec![(0, "c1", vec![short])]);
        let err = expand_pass(&p.name, &p.clauses, &p.signature, &mut policy, 0, 1, false).unwrap_err();
        assert!(matches!(err, EngineError::Protocol { .. }));
    }

    #[test]
    fn instance_bound_formula() {
        assert_eq!(PassConfig::random().instance_bound(), 130);
    }
}
