//! Propositional satisfiability: a CDCL solver and a plain DPLL cross-check.
//!
//! The CDCL solver uses two watched literals per clause, first-UIP learning,
//! VSIDS decision order and Luby restarts. It is incremental: clauses can be
//! added between calls to [`SatSolver::solve`], and solving under assumptions
//! reports the subset of assumptions involved in the final conflict.

use std::collections::BinaryHeap;
use std::fmt;
use std::time::Instant;

/// A propositional variable index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

/// A literal, encoded as `2 * var + sign` where sign 1 means negated.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, positive: bool) -> Self {
        Lit(var.0 << 1 | u32::from(!positive))
    }

    pub fn pos(var: Var) -> Self {
        Self::new(var, true)
    }

    pub fn neg(var: Var) -> Self {
        Self::new(var, false)
    }

    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.is_positive() { "" } else { "-" }, self.var().0 + 1)
    }
}

/// A total assignment over the variables of a solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropModel {
    values: Vec<bool>,
}

impl PropModel {
    pub fn new(values: Vec<bool>) -> Self {
        Self { values }
    }

    pub fn value(&self, var: Var) -> bool {
        self.values[var.0 as usize]
    }

    pub fn lit_value(&self, lit: Lit) -> bool {
        self.value(lit.var()) == lit.is_positive()
    }

    pub fn satisfies(&self, clause: &[Lit]) -> bool {
        clause.iter().any(|&l| self.lit_value(l))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    Sat(PropModel),
    /// Unsatisfiable under the given assumptions; `failed` is a subset of them
    /// that is already contradictory together with the clauses.
    Unsat { failed: Vec<Lit> },
    Timeout,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SatResult::Unsat { .. })
    }
}

/// Wall-clock and conflict limits for a solver call.
#[derive(Debug, Clone, Copy, Default)]
pub struct Budget {
    pub deadline: Option<Instant>,
    pub max_conflicts: Option<u64>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn seconds(secs: f64) -> Self {
        Self {
            deadline: Some(Instant::now() + std::time::Duration::from_secs_f64(secs.max(0.0))),
            max_conflicts: None,
        }
    }

    pub fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

/// A CNF formula: clauses over variables `0..num_vars`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
}

impl Cnf {
    pub fn new(num_vars: u32) -> Self {
        Self { num_vars, clauses: Vec::new() }
    }

    pub fn add(&mut self, clause: Vec<Lit>) {
        for l in &clause {
            self.num_vars = self.num_vars.max(l.var().0 + 1);
        }
        self.clauses.push(clause);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SatStats {
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub restarts: u64,
    pub learnt: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Value {
    True,
    False,
    Undef,
}

const NO_REASON: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Watcher {
    clause: u32,
    blocker: Lit,
}

struct StoredClause {
    lits: Vec<Lit>,
}

#[derive(PartialEq)]
struct HeapEntry {
    activity: f64,
    var: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.activity
            .total_cmp(&other.activity)
            .then_with(|| other.var.cmp(&self.var))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

pub struct SatSolver {
    clauses: Vec<StoredClause>,
    watches: Vec<Vec<Watcher>>,
    values: Vec<Value>,
    levels: Vec<u32>,
    reasons: Vec<u32>,
    phase: Vec<bool>,
    activity: Vec<f64>,
    activity_inc: f64,
    // lazy max-heap; stale entries are skipped on pop
    order: BinaryHeap<HeapEntry>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    seen: Vec<bool>,
    ok: bool,
    stats: SatStats,
}

impl Default for SatSolver {
    fn default() -> Self {
        Self::new()
    }
}

impl SatSolver {
    pub fn new() -> Self {
        Self {
            clauses: Vec::new(),
            watches: Vec::new(),
            values: Vec::new(),
            levels: Vec::new(),
            reasons: Vec::new(),
            phase: Vec::new(),
            activity: Vec::new(),
            activity_inc: 1.0,
            order: BinaryHeap::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            seen: Vec::new(),
            ok: true,
            stats: SatStats::default(),
        }
    }

    pub fn from_cnf(cnf: &Cnf) -> Self {
        let mut s = Self::new();
        s.ensure_vars(cnf.num_vars);
        for c in &cnf.clauses {
            s.add_clause(c);
        }
        s
    }

    pub fn num_vars(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn stats(&self) -> SatStats {
        self.stats
    }

    pub fn new_var(&mut self) -> Var {
        let v = Var(self.values.len() as u32);
        self.values.push(Value::Undef);
        self.levels.push(0);
        self.reasons.push(NO_REASON);
        self.phase.push(false);
        self.activity.push(0.0);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.order.push(HeapEntry { activity: 0.0, var: v.0 });
        v
    }

    pub fn ensure_vars(&mut self, n: u32) {
        while self.num_vars() < n {
            self.new_var();
        }
    }

    fn lit_value(&self, l: Lit) -> Value {
        match self.values[l.var().0 as usize] {
            Value::Undef => Value::Undef,
            v if (v == Value::True) == l.is_positive() => Value::True,
            _ => Value::False,
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    /// Adds a clause at decision level 0. Returns false once the clause set is
    /// known to be unsatisfiable.
    pub fn add_clause(&mut self, clause: &[Lit]) -> bool {
        if !self.ok {
            return false;
        }
        self.backtrack(0);
        if let Some(max) = clause.iter().map(|l| l.var().0).max() {
            self.ensure_vars(max + 1);
        }
        let mut lits: Vec<Lit> = clause.to_vec();
        lits.sort();
        lits.dedup();
        if lits.windows(2).any(|w| w[0] == !w[1]) {
            return true;
        }
        if lits.iter().any(|&l| self.lit_value(l) == Value::True) {
            return true;
        }
        lits.retain(|&l| self.lit_value(l) != Value::False);
        match lits.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(lits[0], NO_REASON);
                if self.propagate().is_some() {
                    self.ok = false;
                }
                self.ok
            }
            _ => {
                self.attach(lits);
                true
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>) -> u32 {
        let idx = self.clauses.len() as u32;
        self.watches[(!lits[0]).index()].push(Watcher { clause: idx, blocker: lits[1] });
        self.watches[(!lits[1]).index()].push(Watcher { clause: idx, blocker: lits[0] });
        self.clauses.push(StoredClause { lits });
        idx
    }

    fn enqueue(&mut self, l: Lit, reason: u32) {
        let v = l.var().0 as usize;
        debug_assert_eq!(self.values[v], Value::Undef);
        self.values[v] = if l.is_positive() { Value::True } else { Value::False };
        self.levels[v] = self.decision_level();
        self.reasons[v] = reason;
        self.trail.push(l);
    }

    /// Unit propagation; returns the index of a conflicting clause.
    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[p.index()]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = None;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.lit_value(w.blocker) == Value::True {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let ci = w.clause as usize;
                {
                    let lits = &mut self.clauses[ci].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[ci].lits[0];
                let nw = Watcher { clause: w.clause, blocker: first };
                if first != w.blocker && self.lit_value(first) == Value::True {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                let len = self.clauses[ci].lits.len();
                let mut moved = false;
                for k in 2..len {
                    let l = self.clauses[ci].lits[k];
                    if self.lit_value(l) != Value::False {
                        self.clauses[ci].lits.swap(1, k);
                        self.watches[(!l).index()].push(nw);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = nw;
                j += 1;
                if self.lit_value(first) == Value::False {
                    conflict = Some(w.clause);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, w.clause);
                }
            }
            ws.truncate(j);
            self.watches[p.index()] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.activity_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.activity_inc *= 1e-100;
            self.rebuild_order();
        }
        if self.values[v] == Value::Undef {
            self.order.push(HeapEntry { activity: self.activity[v], var: v as u32 });
        }
    }

    fn rebuild_order(&mut self) {
        self.order = (0..self.values.len())
            .filter(|&v| self.values[v] == Value::Undef)
            .map(|v| HeapEntry { activity: self.activity[v], var: v as u32 })
            .collect();
    }

    /// First-UIP conflict analysis: returns the learnt clause (asserting literal
    /// first) and the backjump level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, u32) {
        let mut learnt = vec![Lit(0)];
        let mut pending = 0;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        loop {
            let lits = self.clauses[confl as usize].lits.clone();
            let start = usize::from(p.is_some());
            for &q in &lits[start..] {
                let v = q.var().0 as usize;
                if !self.seen[v] && self.levels[v] > 0 {
                    self.seen[v] = true;
                    self.bump(v);
                    if self.levels[v] >= self.decision_level() {
                        pending += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().0 as usize] {
                    break;
                }
            }
            let lit = self.trail[index];
            p = Some(lit);
            let v = lit.var().0 as usize;
            self.seen[v] = false;
            pending -= 1;
            if pending == 0 {
                learnt[0] = !lit;
                break;
            }
            confl = self.reasons[v];
        }
        for l in &learnt[1..] {
            self.seen[l.var().0 as usize] = false;
        }
        let level = if learnt.len() == 1 {
            0
        } else {
            let (max_i, _) = learnt
                .iter()
                .enumerate()
                .skip(1)
                .max_by_key(|(_, l)| self.levels[l.var().0 as usize])
                .expect("learnt clause has at least two literals");
            learnt.swap(1, max_i);
            self.levels[learnt[1].var().0 as usize]
        };
        self.activity_inc *= 1.0 / 0.95;
        (learnt, level)
    }

    /// The assumptions responsible for `p` being false, given that `p` is an
    /// assumption falsified by propagation.
    fn analyze_final(&mut self, p: Lit) -> Vec<Lit> {
        let mut out = vec![p];
        if self.decision_level() == 0 {
            return out;
        }
        self.seen[p.var().0 as usize] = true;
        for i in (self.trail_lim[0]..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().0 as usize;
            if !self.seen[v] {
                continue;
            }
            if self.reasons[v] == NO_REASON {
                if self.levels[v] > 0 {
                    out.push(!l);
                }
            } else {
                for &q in &self.clauses[self.reasons[v] as usize].lits[1..] {
                    if self.levels[q.var().0 as usize] > 0 {
                        self.seen[q.var().0 as usize] = true;
                    }
                }
            }
            self.seen[v] = false;
        }
        self.seen[p.var().0 as usize] = false;
        out
    }

    fn backtrack(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level as usize];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().0 as usize;
            self.phase[v] = l.is_positive();
            self.values[v] = Value::Undef;
            self.reasons[v] = NO_REASON;
            self.order.push(HeapEntry { activity: self.activity[v], var: v as u32 });
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level as usize);
        self.qhead = lim;
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(e) = self.order.pop() {
            let v = e.var as usize;
            if self.values[v] == Value::Undef && e.activity == self.activity[v] {
                return Some(Lit::new(Var(e.var), self.phase[v]));
            }
        }
        // stale entries may have shadowed an unassigned variable
        (0..self.values.len())
            .find(|&v| self.values[v] == Value::Undef)
            .map(|v| Lit::new(Var(v as u32), self.phase[v]))
    }

    fn model(&self) -> PropModel {
        PropModel::new(self.values.iter().map(|v| *v == Value::True).collect())
    }

    pub fn solve(&mut self, assumptions: &[Lit], budget: &Budget) -> SatResult {
        if !self.ok {
            return SatResult::Unsat { failed: Vec::new() };
        }
        if let Some(max) = assumptions.iter().map(|l| l.var().0).max() {
            self.ensure_vars(max + 1);
        }
        self.backtrack(0);
        if self.propagate().is_some() {
            self.ok = false;
            return SatResult::Unsat { failed: Vec::new() };
        }
        let start_conflicts = self.stats.conflicts;
        let mut restart_index = 0u32;
        loop {
            let limit = 100 * luby(restart_index);
            restart_index += 1;
            match self.search(assumptions, limit, budget, start_conflicts) {
                Search::Restart => {
                    self.stats.restarts += 1;
                    self.backtrack(0);
                }
                Search::Done(result) => {
                    self.backtrack(0);
                    return result;
                }
            }
        }
    }

    fn search(&mut self, assumptions: &[Lit], limit: u64, budget: &Budget, start: u64) -> Search {
        let mut conflicts = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                conflicts += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Search::Done(SatResult::Unsat { failed: Vec::new() });
                }
                let (learnt, level) = self.analyze(confl);
                self.backtrack(level);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], NO_REASON);
                } else {
                    let first = learnt[0];
                    let idx = self.attach(learnt);
                    self.enqueue(first, idx);
                }
                self.stats.learnt += 1;
                if self.stats.conflicts.is_multiple_of(64) && budget.expired() {
                    return Search::Done(SatResult::Timeout);
                }
                if budget.max_conflicts.is_some_and(|m| self.stats.conflicts - start >= m) {
                    return Search::Done(SatResult::Timeout);
                }
                continue;
            }
            if conflicts >= limit {
                return Search::Restart;
            }
            let mut next = None;
            while (self.decision_level() as usize) < assumptions.len() {
                let a = assumptions[self.decision_level() as usize];
                match self.lit_value(a) {
                    Value::True => self.trail_lim.push(self.trail.len()),
                    Value::False => {
                        let failed = self.analyze_final(!a);
                        let failed = failed.into_iter().map(|l| !l).collect();
                        return Search::Done(SatResult::Unsat { failed });
                    }
                    Value::Undef => {
                        next = Some(a);
                        break;
                    }
                }
            }
            let decision = match next {
                Some(a) => a,
                None => match self.pick_branch() {
                    Some(l) => {
                        self.stats.decisions += 1;
                        l
                    }
                    None => return Search::Done(SatResult::Sat(self.model())),
                },
            };
            self.trail_lim.push(self.trail.len());
            self.enqueue(decision, NO_REASON);
        }
    }
}

enum Search {
    Restart,
    Done(SatResult),
}

/// The Luby restart sequence 1, 1, 2, 1, 1, 2, 4, ...
fn luby(mut i: u32) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < u64::from(i) + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    let mut x = u64::from(i);
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    i = seq;
    1u64 << i
}

/// One-shot solve of `cnf` plus `blocked` clauses under `assumptions`.
pub fn sat_solve(cnf: &Cnf, assumptions: &[Lit], blocked: &[Vec<Lit>], budget: &Budget) -> SatResult {
    let mut solver = SatSolver::from_cnf(cnf);
    for b in blocked {
        solver.add_clause(b);
    }
    solver.solve(assumptions, budget)
}

/// Plain recursive DPLL with unit propagation. Used to cross-check the CDCL
/// solver; on UNSAT it reports every assumption as failed.
pub fn dpll_solve(cnf: &Cnf, assumptions: &[Lit], budget: &Budget) -> SatResult {
    let n = cnf
        .clauses
        .iter()
        .flatten()
        .chain(assumptions)
        .map(|l| l.var().0 + 1)
        .max()
        .unwrap_or(0)
        .max(cnf.num_vars) as usize;
    let mut assign: Vec<Option<bool>> = vec![None; n];
    for &a in assumptions {
        match assign[a.var().0 as usize] {
            Some(v) if v != a.is_positive() => return SatResult::Unsat { failed: assumptions.to_vec() },
            _ => assign[a.var().0 as usize] = Some(a.is_positive()),
        }
    }
    let mut steps = 0u64;
    match dpll(&cnf.clauses, &mut assign, budget, &mut steps) {
        Some(true) => SatResult::Sat(PropModel::new(assign.iter().map(|v| v.unwrap_or(false)).collect())),
        Some(false) => SatResult::Unsat { failed: assumptions.to_vec() },
        None => SatResult::Timeout,
    }
}

fn dpll(clauses: &[Vec<Lit>], assign: &mut Vec<Option<bool>>, budget: &Budget, steps: &mut u64) -> Option<bool> {
    *steps += 1;
    if (*steps).is_multiple_of(1024) && budget.expired() {
        return None;
    }
    let snapshot = assign.clone();
    let val = |assign: &Vec<Option<bool>>, l: Lit| assign[l.var().0 as usize].map(|v| v == l.is_positive());
    loop {
        let mut changed = false;
        for c in clauses {
            if c.iter().any(|&l| val(assign, l) == Some(true)) {
                continue;
            }
            let open: Vec<Lit> = c.iter().copied().filter(|&l| val(assign, l).is_none()).collect();
            match open.len() {
                0 => {
                    *assign = snapshot;
                    return Some(false);
                }
                1 => {
                    assign[open[0].var().0 as usize] = Some(open[0].is_positive());
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    let branch = clauses
        .iter()
        .filter(|c| !c.iter().any(|&l| val(assign, l) == Some(true)))
        .flat_map(|c| c.iter())
        .find(|&&l| val(assign, l).is_none())
        .copied();
    let Some(lit) = branch else {
        return Some(true);
    };
    for polarity in [lit.is_positive(), !lit.is_positive()] {
        let before = assign.clone();
        assign[lit.var().0 as usize] = Some(polarity);
        match dpll(clauses, assign, budget, steps) {
            Some(true) => return Some(true),
            None => return None,
            Some(false) => *assign = before,
        }
    }
    *assign = snapshot;
    Some(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lit(i: i32) -> Lit {
        Lit::new(Var(i.unsigned_abs() - 1), i > 0)
    }

    fn cnf(clauses: &[&[i32]]) -> Cnf {
        let mut c = Cnf::new(0);
        for cl in clauses {
            c.add(cl.iter().map(|&i| lit(i)).collect());
        }
        c
    }

    fn brute_force(cnf: &Cnf) -> bool {
        let n = cnf.num_vars;
        (0u32..1 << n).any(|bits| {
            cnf.clauses
                .iter()
                .all(|c| c.iter().any(|l| ((bits >> l.var().0) & 1 == 1) == l.is_positive()))
        })
    }

    #[test]
    fn luby_prefix() {
        let seq: Vec<u64> = (0..15).map(luby).collect();
        assert_eq!(seq, vec![1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }

    #[test]
    fn trivial_verdicts() {
        assert!(sat_solve(&cnf(&[&[1], &[-1]]), &[], &[], &Budget::unlimited()).is_unsat());
        match sat_solve(&cnf(&[&[1, 2]]), &[], &[], &Budget::unlimited()) {
            SatResult::Sat(m) => assert!(m.satisfies(&[lit(1), lit(2)])),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn failed_assumptions_are_a_subset() {
        // a -> x, b -> ~x, c unrelated
        let f = cnf(&[&[-1, 4], &[-2, -4], &[3, 5]]);
        let res = sat_solve(&f, &[lit(3), lit(1), lit(2)], &[], &Budget::unlimited());
        match res {
            SatResult::Unsat { failed } => {
                let mut failed = failed;
                failed.sort();
                assert_eq!(failed, vec![lit(1), lit(2)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn incremental_blocking_clauses_enumerate_models() {
        let mut s = SatSolver::new();
        s.add_clause(&[lit(1), lit(2)]);
        let mut count = 0;
        while let SatResult::Sat(m) = s.solve(&[], &Budget::unlimited()) {
            count += 1;
            let block: Vec<Lit> = (0..2).map(|v| Lit::new(Var(v), !m.value(Var(v)))).collect();
            s.add_clause(&block);
        }
        assert_eq!(count, 3);
    }

    #[test]
    fn pigeonhole_four_into_three_is_unsat() {
        let var = |p: i32, h: i32| p * 3 + h + 1;
        let mut cls: Vec<Vec<i32>> = (0..4).map(|p| (0..3).map(|h| var(p, h)).collect()).collect();
        for h in 0..3 {
            for p in 0..4 {
                for q in p + 1..4 {
                    cls.push(vec![-var(p, h), -var(q, h)]);
                }
            }
        }
        let refs: Vec<&[i32]> = cls.iter().map(|c| c.as_slice()).collect();
        let f = cnf(&refs);
        assert!(sat_solve(&f, &[], &[], &Budget::unlimited()).is_unsat());
        assert!(dpll_solve(&f, &[], &Budget::unlimited()).is_unsat());
    }

    #[test]
    fn conflict_budget_times_out() {
        let var = |p: i32, h: i32| p * 7 + h + 1;
        let mut f = Cnf::new(0);
        for p in 0..8 {
            f.add((0..7).map(|h| lit(var(p, h))).collect());
        }
        for h in 0..7 {
            for p in 0..8 {
                for q in p + 1..8 {
                    f.add(vec![lit(-var(p, h)), lit(-var(q, h))]);
                }
            }
        }
        let budget = Budget { deadline: None, max_conflicts: Some(10) };
        assert_eq!(sat_solve(&f, &[], &[], &budget), SatResult::Timeout);
    }

    #[test]
    fn random_cnfs_agree_with_truth_tables_and_dpll() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.gen_range(1..=10u32);
            let m = rng.gen_range(1..=45usize);
            let mut f = Cnf::new(n);
            for _ in 0..m {
                let k = rng.gen_range(1..=3);
                f.add((0..k).map(|_| Lit::new(Var(rng.gen_range(0..n)), rng.gen())).collect());
            }
            let expected = brute_force(&f);
            let res = sat_solve(&f, &[], &[], &Budget::unlimited());
            assert_eq!(res.is_sat(), expected, "{f:?}");
            if let SatResult::Sat(m) = &res {
                assert!(f.clauses.iter().all(|c| m.satisfies(c)));
            }
            assert_eq!(dpll_solve(&f, &[], &Budget::unlimited()).is_sat(), expected);
        }
    }
}
