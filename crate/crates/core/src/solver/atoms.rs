//! Hash-consed ground terms and the atom ↔ propositional-variable table.

use std::collections::HashMap;

use crate::fol::{Atom, Clause, Literal, Symbol, Term};
use crate::solver::sat::{Cnf, Lit, Var};
use crate::solver::SolverError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TermNode {
    pub head: Symbol,
    pub args: Vec<TermId>,
}

/// Ground terms, each stored once; every subterm of a stored term is stored.
#[derive(Debug, Clone, Default)]
pub struct TermBank {
    nodes: Vec<TermNode>,
    index: HashMap<TermNode, TermId>,
}

impl TermBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: TermId) -> &TermNode {
        &self.nodes[id.0 as usize]
    }

    pub fn ids(&self) -> impl Iterator<Item = TermId> {
        (0..self.nodes.len() as u32).map(TermId)
    }

    pub fn intern_node(&mut self, node: TermNode) -> TermId {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = TermId(self.nodes.len() as u32);
        self.nodes.push(node.clone());
        self.index.insert(node, id);
        id
    }

    pub fn intern(&mut self, term: &Term) -> Result<TermId, SolverError> {
        match term {
            Term::Var(_) => Err(SolverError::NotGround),
            Term::App(head, args) => {
                let args = args.iter().map(|a| self.intern(a)).collect::<Result<_, _>>()?;
                Ok(self.intern_node(TermNode { head: head.clone(), args }))
            }
        }
    }

    pub fn to_term(&self, id: TermId) -> Term {
        let n = self.node(id);
        Term::App(n.head.clone(), n.args.iter().map(|&a| self.to_term(a)).collect())
    }

    pub fn render(&self, id: TermId) -> String {
        self.to_term(id).to_string()
    }
}

/// A ground atom over interned terms. Equalities are stored with the smaller
/// term id on the left.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GroundAtom {
    Pred(Symbol, Vec<TermId>),
    Eq(TermId, TermId),
}

impl GroundAtom {
    pub fn eq(a: TermId, b: TermId) -> Self {
        if a <= b {
            GroundAtom::Eq(a, b)
        } else {
            GroundAtom::Eq(b, a)
        }
    }
}

/// Bijection between ground atoms and propositional variables.
#[derive(Debug, Clone, Default)]
pub struct AtomTable {
    pub terms: TermBank,
    atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, Var>,
}

impl AtomTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, var: Var) -> &GroundAtom {
        &self.atoms[var.0 as usize]
    }

    pub fn atoms(&self) -> impl Iterator<Item = (Var, &GroundAtom)> {
        self.atoms.iter().enumerate().map(|(i, a)| (Var(i as u32), a))
    }

    pub fn var_of(&self, atom: &GroundAtom) -> Option<Var> {
        self.index.get(atom).copied()
    }

    pub fn intern_atom(&mut self, atom: GroundAtom) -> Var {
        if let Some(&v) = self.index.get(&atom) {
            return v;
        }
        let v = Var(self.atoms.len() as u32);
        self.atoms.push(atom.clone());
        self.index.insert(atom, v);
        v
    }

    pub fn literal(&mut self, lit: &Literal) -> Result<Lit, SolverError> {
        let atom = match &lit.atom {
            Atom::Pred(p, args) => {
                let args = args.iter().map(|a| self.terms.intern(a)).collect::<Result<_, _>>()?;
                GroundAtom::Pred(p.clone(), args)
            }
            Atom::Eq(l, r) => GroundAtom::eq(self.terms.intern(l)?, self.terms.intern(r)?),
        };
        Ok(Lit::new(self.intern_atom(atom), lit.positive))
    }

    pub fn clause(&mut self, clause: &Clause) -> Result<Vec<Lit>, SolverError> {
        clause.literals.iter().map(|l| self.literal(l)).collect()
    }

    /// Human-readable form of a propositional literal.
    pub fn render(&self, lit: Lit) -> String {
        let body = match self.atom(lit.var()) {
            GroundAtom::Pred(p, args) => {
                Term::App(p.clone(), args.iter().map(|&a| self.terms.to_term(a)).collect()).to_string()
            }
            GroundAtom::Eq(a, b) => {
                let op = if lit.is_positive() { "=" } else { "!=" };
                return format!("{} {op} {}", self.terms.render(*a), self.terms.render(*b));
            }
        };
        if lit.is_positive() {
            body
        } else {
            format!("~{body}")
        }
    }
}

/// Propositional abstraction of ground clauses: each distinct atom becomes a
/// variable, polarity is kept.
pub fn abstract_clauses(clauses: &[Clause]) -> Result<(Cnf, AtomTable), SolverError> {
    let mut table = AtomTable::new();
    let mut cnf = Cnf::new(0);
    for c in clauses {
        cnf.add(table.clause(c)?);
    }
    cnf.num_vars = table.num_atoms() as u32;
    Ok((cnf, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tptp::parse_cnf;

    fn clauses(text: &str) -> Vec<Clause> {
        parse_cnf(text).unwrap().clauses
    }

    #[test]
    fn complementary_units_share_a_variable() {
        let (cnf, table) = abstract_clauses(&clauses("cnf(a, axiom, p(c)). cnf(b, axiom, ~p(c)).")).unwrap();
        assert_eq!(cnf.num_vars, 1);
        assert_eq!(cnf.clauses, vec![vec![Lit::pos(Var(0))], vec![Lit::neg(Var(0))]]);
        assert_eq!(table.num_atoms(), 1);
    }

    #[test]
    fn equality_orientation_is_normalized() {
        let (cnf, _) = abstract_clauses(&clauses("cnf(a, axiom, c = d). cnf(b, axiom, d = c).")).unwrap();
        assert_eq!(cnf.num_vars, 1);
        assert_eq!(cnf.clauses[0], cnf.clauses[1]);
    }

    #[test]
    fn deep_instance_against_its_negation() {
        let text = "cnf(a, axiom, p(f(t(c,c),g(e)))). cnf(b, axiom, ~p(f(t(c,c),g(e)))).";
        let (cnf, table) = abstract_clauses(&clauses(text)).unwrap();
        assert_eq!(cnf.num_vars, 1);
        assert_eq!(cnf.clauses[0][0], !cnf.clauses[1][0]);
        // c, e, t(c,c), g(e), f(..)
        assert_eq!(table.terms.len(), 5);
    }

    #[test]
    fn non_ground_input_is_rejected() {
        let err = abstract_clauses(&clauses("cnf(a, axiom, p(X)).")).unwrap_err();
        assert_eq!(err, SolverError::NotGround);
    }
}
