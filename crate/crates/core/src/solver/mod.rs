//! Ground solver: SAT abstraction refined by congruence-closure model checks.
//!
//! [`decide_ground`] enumerates models of the propositional abstraction and
//! checks each against the equality axioms. A violated model yields blocking
//! clauses that are valid in EUF, so the loop ends either with an
//! equality-respecting model or with the abstraction running out of models.
//! Each input clause is guarded by a selector literal so that the final
//! conflict names the input clauses it used.

pub mod atoms;
pub mod cc;
pub mod sat;

use std::collections::BTreeSet;
use std::time::Instant;

use thiserror::Error;

use crate::fol::Clause;
use atoms::{AtomTable, TermId};
use cc::{congruence_check, CcOutcome};
use sat::{Lit, SatResult, SatSolver};

pub use atoms::abstract_clauses;
pub use sat::{dpll_solve, sat_solve, Budget, PropModel};

/// Default time limit for one ground problem, in seconds.
pub const DEFAULT_BUDGET_SECS: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("the solver only accepts ground clauses")]
    NotGround,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub models: u64,
    pub blocking_clauses: u64,
    pub cc_merges: u64,
    pub conflicts: u64,
    pub decisions: u64,
    pub atoms: u64,
    pub terms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroundVerdict {
    /// Indices into the input clause list whose conjunction is unsatisfiable.
    Unsat { core: Vec<usize> },
    Sat { model: PropModel, classes: Vec<Vec<TermId>> },
    Timeout,
}

impl GroundVerdict {
    pub fn is_unsat(&self) -> bool {
        matches!(self, GroundVerdict::Unsat { .. })
    }

    pub fn is_sat(&self) -> bool {
        matches!(self, GroundVerdict::Sat { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            GroundVerdict::Unsat { .. } => "unsat",
            GroundVerdict::Sat { .. } => "sat",
            GroundVerdict::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GroundOptions {
    pub budget: Budget,
    /// Re-run every propositional query with DPLL and assert equal verdicts.
    pub cross_check: bool,
}

impl GroundOptions {
    pub fn with_budget(budget: Budget) -> Self {
        Self { budget, cross_check: false }
    }
}

#[derive(Debug, Clone)]
pub struct GroundOutcome {
    pub verdict: GroundVerdict,
    pub table: AtomTable,
    pub stats: SolverStats,
}

pub fn decide_ground(clauses: &[Clause], budget: Budget) -> Result<GroundOutcome, SolverError> {
    decide_ground_with(clauses, &GroundOptions::with_budget(budget))
}

pub fn decide_ground_with(clauses: &[Clause], options: &GroundOptions) -> Result<GroundOutcome, SolverError> {
    let mut table = AtomTable::new();
    let mut encoded = Vec::with_capacity(clauses.len());
    for c in clauses {
        encoded.push(table.clause(c)?);
    }
    let atoms = table.num_atoms() as u32;
    let mut solver = SatSolver::new();
    solver.ensure_vars(atoms);
    // selector for clause i is variable atoms + i
    let selectors: Vec<Lit> = (0..clauses.len()).map(|_| Lit::pos(solver.new_var())).collect();
    for (lits, &sel) in encoded.iter().zip(&selectors) {
        let mut guarded = lits.clone();
        guarded.push(!sel);
        solver.add_clause(&guarded);
    }
    let mut blocked: Vec<Vec<Lit>> = Vec::new();
    let mut stats = SolverStats {
        atoms: u64::from(atoms),
        terms: table.terms.len() as u64,
        ..SolverStats::default()
    };

    let verdict = loop {
        if options.budget.expired() {
            break GroundVerdict::Timeout;
        }
        let result = solver.solve(&selectors, &options.budget);
        if options.cross_check {
            cross_check(&encoded, &selectors, &blocked, &result);
        }
        match result {
            SatResult::Timeout => break GroundVerdict::Timeout,
            SatResult::Unsat { failed } => {
                let first = atoms;
                let core: BTreeSet<usize> = failed
                    .iter()
                    .filter(|l| l.var().0 >= first)
                    .map(|l| (l.var().0 - first) as usize)
                    .collect();
                break GroundVerdict::Unsat { core: core.into_iter().collect() };
            }
            SatResult::Sat(model) => {
                stats.models += 1;
                let restricted = PropModel::new((0..atoms).map(|v| model.value(sat::Var(v))).collect());
                match congruence_check(&restricted, &table) {
                    CcOutcome::Consistent { classes, merges } => {
                        stats.cc_merges += merges;
                        break GroundVerdict::Sat { model: restricted, classes };
                    }
                    CcOutcome::Conflict { blocking, merges } => {
                        stats.cc_merges += merges;
                        for clause in blocking {
                            debug_assert!(!restricted.satisfies(&clause));
                            stats.blocking_clauses += 1;
                            solver.add_clause(&clause);
                            if options.cross_check {
                                blocked.push(clause);
                            }
                        }
                    }
                }
            }
        }
    };
    let sat_stats = solver.stats();
    stats.conflicts = sat_stats.conflicts;
    stats.decisions = sat_stats.decisions;
    Ok(GroundOutcome { verdict, table, stats })
}

fn cross_check(encoded: &[Vec<Lit>], selectors: &[Lit], blocked: &[Vec<Lit>], result: &SatResult) {
    if matches!(result, SatResult::Timeout) {
        return;
    }
    let mut cnf = sat::Cnf::new(0);
    for (lits, &sel) in encoded.iter().zip(selectors) {
        let mut guarded = lits.clone();
        guarded.push(!sel);
        cnf.add(guarded);
    }
    for b in blocked {
        cnf.add(b.clone());
    }
    let other = dpll_solve(&cnf, selectors, &Budget::unlimited());
    assert_eq!(other.is_sat(), result.is_sat(), "CDCL and DPLL disagree");
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinimizedCore {
    pub core: Vec<usize>,
    /// False when the budget ran out before every clause was tried.
    pub minimal: bool,
    pub checks: usize,
}

/// Deletion-based shrinking of an unsatisfiable subset to a 1-minimal one.
/// Clauses whose index is in `pinned` are never removed.
pub fn minimize_core(
    clauses: &[Clause],
    core: &[usize],
    pinned: &BTreeSet<usize>,
    budget: Budget,
) -> Result<MinimizedCore, SolverError> {
    let mut current: Vec<usize> = core.to_vec();
    current.sort_unstable();
    current.dedup();
    let mut checks = 0;
    let mut i = 0;
    while i < current.len() {
        let candidate = current[i];
        if pinned.contains(&candidate) {
            i += 1;
            continue;
        }
        if budget.expired() {
            return Ok(MinimizedCore { core: current, minimal: false, checks });
        }
        let trial: Vec<usize> = current.iter().copied().filter(|&c| c != candidate).collect();
        let subset: Vec<Clause> = trial.iter().map(|&k| clauses[k].clone()).collect();
        checks += 1;
        match decide_ground(&subset, budget)?.verdict {
            GroundVerdict::Unsat { core: sub } => {
                // keep only what the smaller check needed, plus pinned clauses
                let needed: BTreeSet<usize> = sub.iter().map(|&k| trial[k]).collect();
                current = trial
                    .into_iter()
                    .filter(|k| needed.contains(k) || pinned.contains(k))
                    .collect();
                i = current.partition_point(|&k| k < candidate);
            }
            GroundVerdict::Sat { .. } => i += 1,
            GroundVerdict::Timeout => return Ok(MinimizedCore { core: current, minimal: false, checks }),
        }
    }
    Ok(MinimizedCore { core: current, minimal: true, checks })
}

/// Wall time helper used by callers that report solver timings.
pub fn elapsed_secs(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tptp::parse_cnf;

    fn clauses(text: &str) -> Vec<Clause> {
        parse_cnf(text).unwrap().clauses
    }

    fn decide(text: &str) -> GroundVerdict {
        let opts = GroundOptions { budget: Budget::unlimited(), cross_check: true };
        decide_ground_with(&clauses(text), &opts).unwrap().verdict
    }

    #[test]
    fn euf_conflict_through_congruence() {
        let v = decide("cnf(a, axiom, f(a) = b). cnf(b, axiom, a = c). cnf(c, axiom, f(c) != b).");
        assert_eq!(v, GroundVerdict::Unsat { core: vec![0, 1, 2] });
    }

    #[test]
    fn single_positive_atom_is_sat() {
        assert!(decide("cnf(a, axiom, p(c)).").is_sat());
    }

    #[test]
    fn instance_against_negation() {
        let v = decide("cnf(a, axiom, p(f(t(c,c),g(e)))). cnf(b, axiom, ~p(f(t(c,c),g(e)))).");
        assert_eq!(v, GroundVerdict::Unsat { core: vec![0, 1] });
    }

    #[test]
    fn disjunctive_equality_reasoning() {
        // either a = b or a = c; both lead to p(a) being forced false
        let v = decide(
            "cnf(a, axiom, a = b | a = c). cnf(b, axiom, ~p(b)). cnf(c, axiom, ~p(c)). cnf(d, axiom, p(a)). cnf(e, axiom, q(d)).",
        );
        assert_eq!(v, GroundVerdict::Unsat { core: vec![0, 1, 2, 3] });
    }

    #[test]
    fn empty_clause_is_its_own_core() {
        assert_eq!(decide("cnf(a, axiom, p(c)). cnf(b, axiom, $false)."), GroundVerdict::Unsat { core: vec![1] });
    }

    #[test]
    fn empty_set_is_sat() {
        assert!(decide("").is_sat());
    }

    #[test]
    fn rejects_variables() {
        assert_eq!(decide_ground(&clauses("cnf(a, axiom, p(X))."), Budget::unlimited()).unwrap_err(), SolverError::NotGround);
    }

    #[test]
    fn minimize_removes_redundant_clause() {
        let cs = clauses("cnf(a, axiom, p(c)). cnf(b, axiom, ~p(c)). cnf(c, axiom, q(d)).");
        let m = minimize_core(&cs, &[0, 1, 2], &BTreeSet::new(), Budget::unlimited()).unwrap();
        assert_eq!(m.core, vec![0, 1]);
        assert!(m.minimal);
    }

    #[test]
    fn minimize_keeps_a_minimal_core() {
        let cs = clauses("cnf(a, axiom, f(a) = b). cnf(b, axiom, a = c). cnf(c, axiom, f(c) != b).");
        let m = minimize_core(&cs, &[0, 1, 2], &BTreeSet::new(), Budget::unlimited()).unwrap();
        assert_eq!(m.core, vec![0, 1, 2]);
    }

    #[test]
    fn minimize_respects_pins() {
        let cs = clauses("cnf(a, axiom, p(c)). cnf(b, axiom, ~p(c)). cnf(c, axiom, q(d)).");
        let pinned: BTreeSet<usize> = [2].into();
        let m = minimize_core(&cs, &[0, 1, 2], &pinned, Budget::unlimited()).unwrap();
        assert_eq!(m.core, vec![0, 1, 2]);
    }

    #[test]
    fn minimize_picks_one_of_two_proofs() {
        let cs = clauses("cnf(a, axiom, p(c)). cnf(b, axiom, ~p(c)). cnf(c, axiom, q(d)). cnf(d, axiom, ~q(d)).");
        let m = minimize_core(&cs, &[0, 1, 2, 3], &BTreeSet::new(), Budget::unlimited()).unwrap();
        assert_eq!(m.core.len(), 2);
        let sub: Vec<Clause> = m.core.iter().map(|&i| cs[i].clone()).collect();
        assert!(decide_ground(&sub, Budget::unlimited()).unwrap().verdict.is_unsat());
    }

    #[test]
    fn expired_budget_times_out() {
        let past = Budget { deadline: Some(Instant::now()), max_conflicts: None };
        let v = decide_ground(&clauses("cnf(a, axiom, p(c))."), past).unwrap().verdict;
        assert_eq!(v, GroundVerdict::Timeout);
    }
}
