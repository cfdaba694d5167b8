//! How many of the assignments a reference proof used does a policy propose
//! within its first k samples, per level, summarized by quantiles over problems.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::{EngineError, PassConfig, Policy, PolicyRequest, Proposal};
use crate::fol::{Clause, FreshNamer, HeadAssignment};
use crate::store::{ReplayError, SolutionRecord};
use crate::tptp::Problem;

pub const DEFAULT_GRID: [usize; 9] = [1, 2, 3, 5, 7, 10, 15, 20, 25];
pub const QUANTILES: [f64; 3] = [0.1, 0.5, 0.9];

/// (clause key, assignment) pairs a proof used, per level.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Labels {
    pub level0: Vec<(String, Vec<String>)>,
    pub level1: Vec<(String, Vec<String>)>,
    /// Level-1 clauses needing a proposal, keyed like `level1`.
    level1_clauses: Vec<Clause>,
}

/// Per clause key, the proposals in sample order; `None` is Stop.
pub type ProposalMap = HashMap<String, Vec<Option<Vec<String>>>>;

pub fn labels_of(record: &SolutionRecord, problem: &Problem) -> Result<Labels, ReplayError> {
    let mut labels = Labels::default();
    for inst in &record.instances {
        let parent = problem.clause(&inst.parent).ok_or_else(|| ReplayError::UnknownParent {
            problem: problem.name.clone(),
            parent: inst.parent.clone(),
        })?;
        let Some(first) = inst.levels.first() else { continue };
        let names: Vec<String> = first.symbols().iter().map(|s| s.to_string()).collect();
        labels.level0.push((parent.name.to_string(), names.clone()));
        if let Some(second) = inst.levels.get(1) {
            let heads = names
                .iter()
                .map(|n| {
                    problem.signature.function(n).cloned().ok_or_else(|| ReplayError::BadLevel {
                        parent: inst.parent.clone(),
                        message: format!("unknown function symbol {n}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let l1 = parent
                .deepen(&HeadAssignment::new(heads), &mut FreshNamer::for_clause(parent))
                .map_err(|e| ReplayError::BadLevel { parent: inst.parent.clone(), message: e.to_string() })?;
            let key = l1.formula_text();
            if !labels.level1_clauses.iter().any(|c| c.formula_text() == key) {
                let name = format!("{}_l{}", parent.name, labels.level1_clauses.len());
                labels.level1_clauses.push(l1.with_name(&name));
            }
            labels.level1.push((key, second.symbols().iter().map(|s| s.to_string()).collect()));
        }
    }
    labels.level0.sort();
    labels.level0.dedup();
    labels.level1.sort();
    labels.level1.dedup();
    Ok(labels)
}

/// Fraction of `labels` found among the first `k` proposals for their clause;
/// `None` when there are no labels.
pub fn coverage_fraction(labels: &[(String, Vec<String>)], proposals: &ProposalMap, k: usize) -> Option<f64> {
    if labels.is_empty() {
        return None;
    }
    let hit = labels
        .iter()
        .filter(|(key, a)| {
            proposals
                .get(key)
                .is_some_and(|list| list.iter().take(k).any(|p| p.as_ref() == Some(a)))
        })
        .count();
    Some(hit as f64 / labels.len() as f64)
}

fn ask(
    problem: &Problem,
    clauses: &[Clause],
    key: impl Fn(&Clause) -> String,
    policy: &mut dyn Policy,
    level: usize,
    samples: usize,
    constants_only: bool,
) -> Result<ProposalMap, EngineError> {
    let targets: Vec<usize> = (0..clauses.len()).filter(|&i| !clauses[i].is_ground()).collect();
    if targets.is_empty() || samples == 0 {
        return Ok(ProposalMap::new());
    }
    let req = PolicyRequest {
        problem: &problem.name,
        clauses,
        signature: &problem.signature,
        level,
        samples,
        targets: &targets,
        constants_only,
    };
    let lists = policy.propose(&req)?;
    Ok(targets
        .iter()
        .zip(lists)
        .map(|(&i, list)| {
            let props = list
                .into_iter()
                .map(|p| match p {
                    Proposal::Stop => None,
                    Proposal::Assign(a) => Some(a.names()),
                })
                .collect();
            (key(&clauses[i]), props)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemCoverage {
    pub problem: String,
    /// One value per grid entry, or empty when the proof has no labels at that level.
    pub level0: Vec<f64>,
    pub level1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub level: usize,
    pub quantile: f64,
    /// One value per grid entry.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub grid: Vec<usize>,
    pub rows: Vec<CoverageRow>,
    pub problems: Vec<ProblemCoverage>,
}

/// Linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Coverage of one problem: proposals are drawn once with the largest grid
/// size, and each grid entry looks at a prefix, so values never decrease.
pub fn problem_coverage(
    problem: &Problem,
    record: &SolutionRecord,
    policy: &mut dyn Policy,
    passes: &PassConfig,
    grid: &[usize],
) -> Result<ProblemCoverage, EngineError> {
    let labels = labels_of(record, problem).map_err(|e| EngineError::Malformed(e.to_string()))?;
    let max = grid.iter().copied().max().unwrap_or(0);
    let p0 = ask(problem, &problem.clauses, |c| c.name.to_string(), policy, 0, max, false)?;
    let p1 = ask(problem, &labels.level1_clauses, Clause::formula_text, policy, 1, max, passes.grounding_pass_constants_only)?;
    let row = |labels: &[(String, Vec<String>)], props: &ProposalMap| -> Vec<f64> {
        grid.iter().filter_map(|&k| coverage_fraction(labels, props, k)).collect()
    };
    Ok(ProblemCoverage { problem: problem.name.clone(), level0: row(&labels.level0, &p0), level1: row(&labels.level1, &p1) })
}

pub fn summarize(grid: &[usize], problems: Vec<ProblemCoverage>) -> CoverageTable {
    let mut rows = Vec::new();
    for level in 0..2 {
        let per_problem: Vec<&Vec<f64>> = problems
            .iter()
            .map(|p| if level == 0 { &p.level0 } else { &p.level1 })
            .filter(|v| !v.is_empty())
            .collect();
        for &q in &QUANTILES {
            let values = (0..grid.len())
                .map(|g| {
                    let mut col: Vec<f64> = per_problem.iter().map(|v| v[g]).collect();
                    col.sort_by(f64::total_cmp);
                    quantile(&col, q)
                })
                .collect();
            rows.push(CoverageRow { level, quantile: q, values });
        }
    }
    CoverageTable { grid: grid.to_vec(), rows, problems }
}

/// Coverage over every problem with a reference proof; the first solved record
/// of each problem is the reference. `policy_for` gives the policy used for a
/// problem.
pub fn coverage_eval(
    references: &[(&Problem, &SolutionRecord)],
    mut policy_for: impl FnMut(&Problem) -> Box<dyn Policy + Send>,
    passes: &PassConfig,
    grid: &[usize],
) -> Result<CoverageTable, EngineError> {
    let mut out = Vec::new();
    for (problem, record) in references {
        let mut policy = policy_for(problem);
        out.push(problem_coverage(problem, record, &mut policy, passes, grid)?);
    }
    Ok(summarize(grid, out))
}

/// First solved record per problem, for problems present in `problems`.
pub fn references<'a>(problems: &'a [Problem], records: &'a [SolutionRecord]) -> Vec<(&'a Problem, &'a SolutionRecord)> {
    let mut first: BTreeMap<&str, &SolutionRecord> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_solved() && !r.instances.is_empty()) {
        first.entry(r.problem.as_str()).or_insert(r);
    }
    problems.iter().filter_map(|p| first.get(p.name.as_str()).map(|r| (p, *r))).collect()
}

impl CoverageTable {
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| level | q |");
        for k in &self.grid {
            let _ = write!(s, " {k} |");
        }
        s.push_str("\n|---|---|");
        s.push_str(&"---|".repeat(self.grid.len()));
        s.push('\n');
        for row in &self.rows {
            let _ = write!(s, "| {} | {} |", row.level, row.quantile);
            for v in &row.values {
                if v.is_nan() {
                    s.push_str(" - |");
                } else {
                    let _ = write!(s, " {v:.2} |");
                }
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{InstanceRecord, LevelAssignment, PolicyTag, Status};
    use crate::tptp::parse_cnf;

    fn fig1() -> Problem {
        parse_cnf("cnf(c1, axiom, ~p(f(X,Z))).\ncnf(c2, negated_conjecture, p(f(t(c,c),g(e)))).").unwrap()
    }

    fn fig1_record() -> SolutionRecord {
        let la = |v: &[&str]| LevelAssignment(v.iter().enumerate().map(|(i, s)| (format!("X{i}"), s.to_string())).collect());
        SolutionRecord {
            problem: "fig1".into(),
            run: 1,
            status: Status::Unsat,
            policy: PolicyTag::Random,
            seed: 0,
            wall_time_s: 0.0,
            instances: vec![InstanceRecord {
                parent: "c1".into(),
                levels: vec![la(&["t", "g"]), la(&["c", "c", "e"])],
                ground_clause: "~p(f(t(c,c),g(e)))".into(),
            }],
            reason: None,
            stats: None,
        }
    }

    /// Proposes the given assignments for every target, then stops.
    struct Fixed(Vec<&'static str>, Vec<&'static str>);

    impl Policy for Fixed {
        fn propose(&mut self, req: &PolicyRequest<'_>) -> Result<Vec<Vec<Proposal>>, EngineError> {
            let names = if req.level == 0 { &self.0 } else { &self.1 };
            let a = HeadAssignment::new(names.iter().map(|n| req.signature.function(n).unwrap().clone()).collect());
            Ok(req.targets.iter().map(|_| vec![Proposal::Assign(a.clone())]).collect())
        }
    }

    struct Silent;

    impl Policy for Silent {
        fn propose(&mut self, req: &PolicyRequest<'_>) -> Result<Vec<Vec<Proposal>>, EngineError> {
            Ok(req.targets.iter().map(|_| Vec::new()).collect())
        }
    }

    #[test]
    fn labels_of_fig1() {
        let l = labels_of(&fig1_record(), &fig1()).unwrap();
        assert_eq!(l.level0, vec![("c1".to_string(), vec!["t".to_string(), "g".to_string()])]);
        assert_eq!(l.level1[0].0, "~p(f(t(X0,X1),g(X2)))");
    }

    #[test]
    fn covering_proposals_give_one() {
        let p = fig1();
        let r = fig1_record();
        let t = coverage_eval(&[(&p, &r)], |_| Box::new(Fixed(vec!["t", "g"], vec!["c", "c", "e"])), &PassConfig::random(), &DEFAULT_GRID).unwrap();
        for row in &t.rows {
            assert!(row.values.iter().all(|&v| v == 1.0), "{row:?}");
        }
    }

    #[test]
    fn empty_proposals_give_zero() {
        let p = fig1();
        let r = fig1_record();
        let t = coverage_eval(&[(&p, &r)], |_| Box::new(Silent), &PassConfig::random(), &DEFAULT_GRID).unwrap();
        assert!(t.rows.iter().all(|row| row.values.iter().all(|&v| v == 0.0)));
        assert_eq!(t.rows.len(), 6);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [0.0, 0.5, 1.0];
        assert_eq!(quantile(&v, 0.5), 0.5);
        assert!((quantile(&v, 0.1) - 0.1).abs() < 1e-12);
        assert!(quantile(&[], 0.5).is_nan());
    }
}
