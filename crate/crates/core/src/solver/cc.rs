//! Congruence closure over interned ground terms, with explanations.
//!
//! Classes are kept with an explicit representative per term (the smaller
//! class is relabelled on merge). Every merge also adds an edge to a proof
//! forest labelled with its reason; explaining `a = b` walks the forest from
//! both ends to their common ancestor and expands congruence edges into the
//! argument pairs they rely on.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::fol::Symbol;
use crate::solver::atoms::{AtomTable, GroundAtom, TermBank, TermId};
use crate::solver::sat::{Lit, PropModel, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reason {
    /// An equality atom assigned true.
    Asserted(Var),
    /// Two applications with pairwise congruent arguments.
    Congruence(TermId, TermId),
}

pub struct CongruenceClosure<'a> {
    bank: &'a TermBank,
    repr: Vec<TermId>,
    members: Vec<Vec<TermId>>,
    uses: Vec<Vec<TermId>>,
    signatures: HashMap<(Symbol, Vec<TermId>), TermId>,
    proof: Vec<Option<(TermId, Reason)>>,
    pending: Vec<(TermId, TermId, Reason)>,
    merges: u64,
}

impl<'a> CongruenceClosure<'a> {
    pub fn new(bank: &'a TermBank) -> Self {
        let n = bank.len();
        let mut cc = Self {
            bank,
            repr: (0..n as u32).map(TermId).collect(),
            members: (0..n as u32).map(|i| vec![TermId(i)]).collect(),
            uses: vec![Vec::new(); n],
            signatures: HashMap::new(),
            proof: vec![None; n],
            pending: Vec::new(),
            merges: 0,
        };
        // subterms are interned before their parents, so ids are topologically ordered
        for t in bank.ids() {
            let node = bank.node(t);
            for &a in &node.args {
                cc.uses[a.0 as usize].push(t);
            }
            let sig = cc.signature(t);
            if let Some(&other) = cc.signatures.get(&sig) {
                cc.pending.push((t, other, Reason::Congruence(t, other)));
            } else {
                cc.signatures.insert(sig, t);
            }
        }
        cc.propagate();
        cc
    }

    pub fn find(&self, t: TermId) -> TermId {
        self.repr[t.0 as usize]
    }

    pub fn merges(&self) -> u64 {
        self.merges
    }

    fn signature(&self, t: TermId) -> (Symbol, Vec<TermId>) {
        let node = self.bank.node(t);
        (node.head.clone(), node.args.iter().map(|&a| self.find(a)).collect())
    }

    fn assert_eq(&mut self, a: TermId, b: TermId, var: Var) {
        self.pending.push((a, b, Reason::Asserted(var)));
        self.propagate();
    }

    fn propagate(&mut self) {
        while let Some((a, b, reason)) = self.pending.pop() {
            let (ra, rb) = (self.find(a), self.find(b));
            if ra == rb {
                continue;
            }
            self.merges += 1;
            self.reroot(a);
            self.proof[a.0 as usize] = Some((b, reason));

            let (small, big) = if self.members[ra.0 as usize].len() < self.members[rb.0 as usize].len() {
                (ra, rb)
            } else {
                (rb, ra)
            };
            let moved = std::mem::take(&mut self.members[small.0 as usize]);
            for &m in &moved {
                self.repr[m.0 as usize] = big;
            }
            self.members[big.0 as usize].extend(moved);
            let parents = std::mem::take(&mut self.uses[small.0 as usize]);
            for &u in &parents {
                let sig = self.signature(u);
                match self.signatures.get(&sig) {
                    Some(&v) if self.find(v) != self.find(u) => {
                        self.pending.push((u, v, Reason::Congruence(u, v)));
                    }
                    Some(_) => {}
                    None => {
                        self.signatures.insert(sig, u);
                    }
                }
            }
            self.uses[big.0 as usize].extend(parents);
        }
    }

    /// Reverses the proof-forest path from `t` so that `t` becomes its tree's root.
    fn reroot(&mut self, t: TermId) {
        let mut prev: Option<(TermId, Reason)> = None;
        let mut cur = t;
        loop {
            let next = self.proof[cur.0 as usize].take();
            self.proof[cur.0 as usize] = prev;
            match next {
                Some((parent, reason)) => {
                    prev = Some((cur, reason));
                    cur = parent;
                }
                None => break,
            }
        }
    }

    fn ancestors(&self, t: TermId) -> Vec<TermId> {
        let mut out = vec![t];
        let mut cur = t;
        while let Some((p, _)) = self.proof[cur.0 as usize] {
            out.push(p);
            cur = p;
        }
        out
    }

    /// The asserted equality atoms that entail `a = b`. Requires `find(a) == find(b)`.
    pub fn explain(&self, a: TermId, b: TermId) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        let mut todo = vec![(a, b)];
        let mut done: HashSet<(TermId, TermId)> = HashSet::new();
        while let Some((x, y)) = todo.pop() {
            if x == y || !done.insert((x.min(y), x.max(y))) {
                continue;
            }
            debug_assert_eq!(self.find(x), self.find(y));
            let from_x: HashSet<TermId> = self.ancestors(x).into_iter().collect();
            let lca = self
                .ancestors(y)
                .into_iter()
                .find(|t| from_x.contains(t))
                .expect("congruent terms share a proof tree");
            for start in [x, y] {
                let mut cur = start;
                while cur != lca {
                    let (next, reason) = self.proof[cur.0 as usize].expect("path to the common ancestor");
                    match reason {
                        Reason::Asserted(v) => {
                            out.insert(v);
                        }
                        Reason::Congruence(s, t) => {
                            let (ns, nt) = (self.bank.node(s), self.bank.node(t));
                            todo.extend(ns.args.iter().copied().zip(nt.args.iter().copied()));
                        }
                    }
                    cur = next;
                }
            }
        }
        out
    }

    /// Term classes with more than one member, each sorted.
    pub fn classes(&self) -> Vec<Vec<TermId>> {
        let mut out: Vec<Vec<TermId>> = self
            .members
            .iter()
            .filter(|m| m.len() > 1)
            .map(|m| {
                let mut m = m.clone();
                m.sort();
                m
            })
            .collect();
        out.sort();
        out
    }
}

type PredKey = (Symbol, Vec<TermId>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CcOutcome {
    /// The model respects equality; non-trivial congruence classes attached.
    Consistent { classes: Vec<Vec<TermId>>, merges: u64 },
    /// Each blocking clause is entailed by the equality axioms and false in the model.
    Conflict { blocking: Vec<Vec<Lit>>, merges: u64 },
}

/// Checks a propositional model of the abstraction against reflexivity,
/// symmetry, transitivity and congruence.
pub fn congruence_check(model: &PropModel, table: &AtomTable) -> CcOutcome {
    let mut cc = CongruenceClosure::new(&table.terms);
    for (var, atom) in table.atoms() {
        if let GroundAtom::Eq(a, b) = atom {
            if model.value(var) {
                cc.assert_eq(*a, *b, var);
            }
        }
    }

    let mut blocking: Vec<Vec<Lit>> = Vec::new();
    for (var, atom) in table.atoms() {
        if let GroundAtom::Eq(a, b) = atom {
            if model.value(var) {
                continue;
            }
            if a == b {
                blocking.push(vec![Lit::pos(var)]);
            } else if cc.find(*a) == cc.find(*b) {
                let mut clause: Vec<Lit> = cc.explain(*a, *b).into_iter().map(Lit::neg).collect();
                clause.push(Lit::pos(var));
                blocking.push(clause);
            }
        }
    }

    // (predicate, argument classes) -> (a true atom, the false atoms)
    let mut by_class: HashMap<PredKey, (Option<Var>, Vec<Var>)> = HashMap::new();
    let mut keys = Vec::new();
    for (var, atom) in table.atoms() {
        if let GroundAtom::Pred(p, args) = atom {
            let key = (p.clone(), args.iter().map(|&a| cc.find(a)).collect::<Vec<_>>());
            let entry = by_class.entry(key.clone()).or_insert_with(|| {
                keys.push(key);
                (None, Vec::new())
            });
            if model.value(var) {
                entry.0.get_or_insert(var);
            } else {
                entry.1.push(var);
            }
        }
    }
    for key in &keys {
        let (Some(t), falses) = &by_class[key] else { continue };
        for &f in falses {
            let (GroundAtom::Pred(_, ta), GroundAtom::Pred(_, fa)) = (table.atom(*t), table.atom(f)) else {
                unreachable!("predicate atoms grouped by predicate key")
            };
            let mut expl = BTreeSet::new();
            for (&x, &y) in ta.iter().zip(fa) {
                expl.extend(cc.explain(x, y));
            }
            let mut clause: Vec<Lit> = expl.into_iter().map(Lit::neg).collect();
            clause.push(Lit::neg(*t));
            clause.push(Lit::pos(f));
            blocking.push(clause);
        }
    }

    let merges = cc.merges();
    if blocking.is_empty() {
        CcOutcome::Consistent { classes: cc.classes(), merges }
    } else {
        CcOutcome::Conflict { blocking, merges }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::atoms::abstract_clauses;
    use crate::tptp::parse_cnf;

    /// Abstraction of the given atoms plus the model assigning `truth[i]` to atom i.
    fn setup(atoms: &[&str], truth: &[bool]) -> (AtomTable, PropModel) {
        let text: String = atoms
            .iter()
            .enumerate()
            .map(|(i, a)| format!("cnf(a{i}, axiom, {a}).\n"))
            .collect();
        let (_, table) = abstract_clauses(&parse_cnf(&text).unwrap().clauses).unwrap();
        (table, PropModel::new(truth.to_vec()))
    }

    fn conflicts(outcome: &CcOutcome) -> &[Vec<Lit>] {
        match outcome {
            CcOutcome::Conflict { blocking, .. } => blocking,
            CcOutcome::Consistent { .. } => panic!("expected a conflict"),
        }
    }

    #[test]
    fn transitivity_conflict() {
        let (table, model) = setup(&["a = b", "b = c", "a = c"], &[true, true, false]);
        let out = congruence_check(&model, &table);
        let blocking = conflicts(&out);
        assert_eq!(blocking.len(), 1);
        let mut clause = blocking[0].clone();
        clause.sort();
        assert_eq!(clause, vec![Lit::neg(Var(0)), Lit::neg(Var(1)), Lit::pos(Var(2))]);
        assert!(!model.satisfies(&clause));
    }

    #[test]
    fn congruence_on_predicates() {
        let (table, model) = setup(&["a = b", "p(a)", "p(b)"], &[true, true, false]);
        let out = congruence_check(&model, &table);
        let clause = &conflicts(&out)[0];
        assert!(!model.satisfies(clause));
        let rendered: Vec<String> = clause.iter().map(|&l| table.render(l)).collect();
        assert_eq!(rendered, vec!["a != b", "~p(a)", "p(b)"]);
    }

    #[test]
    fn reflexivity_conflict() {
        let (table, model) = setup(&["f(c) = f(c)"], &[false]);
        let out = congruence_check(&model, &table);
        assert_eq!(conflicts(&out), &[vec![Lit::pos(Var(0))]]);
    }

    #[test]
    fn function_congruence_feeds_equalities() {
        // a = c and f(a) != f(c)
        let (table, model) = setup(&["a = c", "f(a) = f(c)"], &[true, false]);
        let out = congruence_check(&model, &table);
        let clause = &conflicts(&out)[0];
        assert_eq!(clause, &vec![Lit::neg(Var(0)), Lit::pos(Var(1))]);
    }

    #[test]
    fn explanations_stay_small() {
        // a chain plus an unrelated equality that must not appear
        let (table, model) =
            setup(&["a = b", "b = c", "d = e", "c = k", "a = k"], &[true, true, true, true, false]);
        let out = congruence_check(&model, &table);
        let clause = &conflicts(&out)[0];
        assert_eq!(clause.len(), 4);
        assert!(!clause.contains(&Lit::neg(Var(2))));
    }

    #[test]
    fn consistent_model_reports_classes() {
        let (table, model) = setup(&["a = b", "p(a)", "p(b)"], &[true, true, true]);
        match congruence_check(&model, &table) {
            CcOutcome::Consistent { classes, .. } => assert_eq!(classes.len(), 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nested_congruence_explanation() {
        // a = b, g(a) = c  entails g(b) = c via congruence on g
        let (table, model) = setup(&["a = b", "g(a) = c", "g(b) = c"], &[true, true, false]);
        let out = congruence_check(&model, &table);
        let mut clause = conflicts(&out)[0].clone();
        clause.sort();
        assert_eq!(clause, vec![Lit::neg(Var(0)), Lit::neg(Var(1)), Lit::pos(Var(2))]);
    }
}
