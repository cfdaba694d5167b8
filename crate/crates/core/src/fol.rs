//! First-order clausal syntax and the incremental-deepening instantiation step.
//!
//! Terms are plain owned trees. A variable is identified by a clause-local
//! [`VarId`]; the *ordinal* of a variable is its position in
//! [`Clause::variables_in_order`], which is what every external format uses.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Highest instantiation level a clause may reach.
pub const MAX_LEVEL: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FolError {
    #[error("malformed assignment for clause {clause}: {reason}")]
    MalformedAssignment { clause: String, reason: String },
    #[error("clause {clause} is already at the maximum instantiation level {max}")]
    LevelExceeded { clause: String, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymbolKind {
    Function,
    Predicate,
}

/// A function or predicate symbol. Constants are functions of arity 0.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    name: Arc<str>,
    arity: usize,
    kind: SymbolKind,
}

impl Symbol {
    pub fn function(name: impl Into<Arc<str>>, arity: usize) -> Self {
        Self::new(name, arity, SymbolKind::Function)
    }

    pub fn predicate(name: impl Into<Arc<str>>, arity: usize) -> Self {
        Self::new(name, arity, SymbolKind::Predicate)
    }

    pub fn constant(name: impl Into<Arc<str>>) -> Self {
        Self::function(name, 0)
    }

    fn new(name: impl Into<Arc<str>>, arity: usize, kind: SymbolKind) -> Self {
        let name = name.into();
        assert!(!name.is_empty(), "symbol names must be non-empty");
        Self { name, arity, kind }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn is_constant(&self) -> bool {
        self.kind == SymbolKind::Function && self.arity == 0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(VarId),
    App(Symbol, Vec<Term>),
}

impl Term {
    pub fn var(id: u32) -> Self {
        Term::Var(VarId(id))
    }

    /// Builds an application, checking the arity.
    pub fn app(head: Symbol, args: Vec<Term>) -> Self {
        assert_eq!(head.arity(), args.len(), "arity mismatch for {head:?}");
        assert_eq!(head.kind(), SymbolKind::Function);
        Term::App(head, args)
    }

    pub fn constant(name: &str) -> Self {
        Term::App(Symbol::constant(name), Vec::new())
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    fn collect_vars(&self, out: &mut Vec<VarId>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    fn max_var(&self) -> Option<u32> {
        match self {
            Term::Var(v) => Some(v.0),
            Term::App(_, args) => args.iter().filter_map(Term::max_var).max(),
        }
    }

    fn substitute(&self, map: &HashMap<VarId, Term>) -> Term {
        match self {
            Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::App(h, args) => {
                Term::App(h.clone(), args.iter().map(|a| a.substitute(map)).collect())
            }
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }

    pub(crate) fn write_with(
        &self,
        f: &mut dyn fmt::Write,
        name_of: &dyn Fn(VarId) -> String,
    ) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(&name_of(*v)),
            Term::App(h, args) => {
                f.write_str(&quote_name(h.name()))?;
                if !args.is_empty() {
                    f.write_char('(')?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_char(',')?;
                        }
                        a.write_with(f, name_of)?;
                    }
                    f.write_char(')')?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_with(f, &|v| format!("X{}", v.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Pred(Symbol, Vec<Term>),
    Eq(Term, Term),
}

impl Atom {
    fn args(&self) -> Box<dyn Iterator<Item = &Term> + '_> {
        match self {
            Atom::Pred(_, args) => Box::new(args.iter()),
            Atom::Eq(l, r) => Box::new([l, r].into_iter()),
        }
    }

    fn map_args(&self, f: impl Fn(&Term) -> Term) -> Atom {
        match self {
            Atom::Pred(p, args) => Atom::Pred(p.clone(), args.iter().map(f).collect()),
            Atom::Eq(l, r) => Atom::Eq(f(l), f(r)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Self { positive: true, atom }
    }

    pub fn neg(atom: Atom) -> Self {
        Self { positive: false, atom }
    }

    pub fn pred(positive: bool, head: Symbol, args: Vec<Term>) -> Self {
        assert_eq!(head.arity(), args.len(), "arity mismatch for {head:?}");
        assert_eq!(head.kind(), SymbolKind::Predicate);
        Self { positive, atom: Atom::Pred(head, args) }
    }

    pub fn eq(positive: bool, left: Term, right: Term) -> Self {
        Self { positive, atom: Atom::Eq(left, right) }
    }

    pub fn negated(&self) -> Self {
        Self { positive: !self.positive, atom: self.atom.clone() }
    }

    pub fn is_ground(&self) -> bool {
        self.atom.args().all(Term::is_ground)
    }

    pub(crate) fn write_with(
        &self,
        f: &mut dyn fmt::Write,
        name_of: &dyn Fn(VarId) -> String,
    ) -> fmt::Result {
        match &self.atom {
            Atom::Pred(p, args) => {
                if !self.positive {
                    f.write_char('~')?;
                }
                Term::App(p.clone(), args.clone()).write_with(f, name_of)
            }
            Atom::Eq(l, r) => {
                l.write_with(f, name_of)?;
                f.write_str(if self.positive { " = " } else { " != " })?;
                r.write_with(f, name_of)
            }
        }
    }
}

/// One level's head symbol per variable of a clause, in variable order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HeadAssignment {
    pub heads: Vec<Symbol>,
}

impl HeadAssignment {
    pub fn new(heads: Vec<Symbol>) -> Self {
        Self { heads }
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    /// Number of fresh variables the assignment introduces.
    pub fn fresh_count(&self) -> usize {
        self.heads.iter().map(Symbol::arity).sum()
    }

    pub fn names(&self) -> Vec<String> {
        self.heads.iter().map(|s| s.name().to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Origin {
    Input,
    /// Derived from the input clause `parent` by applying `steps` in order;
    /// the level of the instance is `steps.len()`.
    Instance { parent: Arc<str>, steps: Vec<HeadAssignment> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub name: Arc<str>,
    pub role: Arc<str>,
    pub literals: Vec<Literal>,
    pub origin: Origin,
}

impl Clause {
    pub fn input(name: &str, literals: Vec<Literal>) -> Self {
        Self {
            name: name.into(),
            role: "axiom".into(),
            literals,
            origin: Origin::Input,
        }
    }

    pub fn with_role(mut self, role: &str) -> Self {
        self.role = role.into();
        self
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn level(&self) -> usize {
        match &self.origin {
            Origin::Input => 0,
            Origin::Instance { steps, .. } => steps.len(),
        }
    }

    /// Name of the input clause this clause descends from (itself for inputs).
    pub fn root(&self) -> &str {
        match &self.origin {
            Origin::Input => &self.name,
            Origin::Instance { parent, .. } => parent,
        }
    }

    /// Variables by first occurrence: literals left to right, arguments depth first.
    pub fn variables_in_order(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        for lit in &self.literals {
            for t in lit.atom.args() {
                t.collect_vars(&mut out);
            }
        }
        out
    }

    pub fn is_ground(&self) -> bool {
        self.literals.iter().all(Literal::is_ground)
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    fn max_var(&self) -> Option<u32> {
        self.literals
            .iter()
            .flat_map(|l| l.atom.args())
            .filter_map(Term::max_var)
            .max()
    }

    /// Replaces each variable by its assigned head applied to fresh variables.
    pub fn deepen(
        &self,
        assignment: &HeadAssignment,
        namer: &mut FreshNamer,
    ) -> Result<Clause, FolError> {
        let vars = self.variables_in_order();
        let malformed = |reason: String| FolError::MalformedAssignment {
            clause: self.name.to_string(),
            reason,
        };
        if vars.len() != assignment.heads.len() {
            return Err(malformed(format!(
                "{} variables but {} head symbols",
                vars.len(),
                assignment.heads.len()
            )));
        }
        if let Some(bad) = assignment.heads.iter().find(|h| h.kind() != SymbolKind::Function) {
            return Err(malformed(format!("{bad:?} is not a function symbol")));
        }
        if vars.is_empty() {
            return Ok(self.clone());
        }
        if self.level() >= MAX_LEVEL {
            return Err(FolError::LevelExceeded { clause: self.name.to_string(), max: MAX_LEVEL });
        }
        if let Some(top) = self.max_var() {
            namer.reserve_above(top);
        }
        let map: HashMap<VarId, Term> = vars
            .iter()
            .zip(&assignment.heads)
            .map(|(v, head)| {
                let args = (0..head.arity()).map(|_| Term::Var(namer.fresh())).collect();
                (*v, Term::App(head.clone(), args))
            })
            .collect();
        let literals = self
            .literals
            .iter()
            .map(|l| Literal { positive: l.positive, atom: l.atom.map_args(|t| t.substitute(&map)) })
            .collect();
        let origin = match &self.origin {
            Origin::Input => Origin::Instance {
                parent: self.name.clone(),
                steps: vec![assignment.clone()],
            },
            Origin::Instance { parent, steps } => {
                let mut steps = steps.clone();
                steps.push(assignment.clone());
                Origin::Instance { parent: parent.clone(), steps }
            }
        };
        Ok(Clause {
            name: format!("{}_{}", self.name, self.level() + 1).into(),
            role: self.role.clone(),
            literals,
            origin,
        })
    }

    /// Key equal for two clauses iff they are equal up to variable renaming
    /// (literal order is significant).
    pub fn canonical_key(&self) -> CanonicalKey {
        let mut s = String::new();
        self.write_formula(&mut s, "#").expect("writing to a String cannot fail");
        CanonicalKey(s)
    }

    /// The disjunction with variables printed as `{prefix}{ordinal}`.
    pub(crate) fn write_formula(&self, f: &mut dyn fmt::Write, prefix: &str) -> fmt::Result {
        let ordinals: HashMap<VarId, usize> = self
            .variables_in_order()
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        let name_of = |v: VarId| format!("{prefix}{}", ordinals[&v]);
        if self.literals.is_empty() {
            return f.write_str("$false");
        }
        for (i, lit) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            lit.write_with(f, &name_of)?;
        }
        Ok(())
    }

    /// The formula text with canonical variable names `X0, X1, ...`.
    pub fn formula_text(&self) -> String {
        let mut s = String::new();
        self.write_formula(&mut s, "X").expect("writing to a String cannot fail");
        s
    }

    /// Iterates over every symbol occurrence (predicates and functions).
    pub fn symbols(&self) -> Vec<Symbol> {
        fn walk(t: &Term, out: &mut Vec<Symbol>) {
            if let Term::App(h, args) = t {
                out.push(h.clone());
                args.iter().for_each(|a| walk(a, out));
            }
        }
        let mut out = Vec::new();
        for lit in &self.literals {
            if let Atom::Pred(p, _) = &lit.atom {
                out.push(p.clone());
            }
            lit.atom.args().for_each(|t| walk(t, &mut out));
        }
        out
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_formula(f, "X")
    }
}

/// The name as written in formula text, single-quoted unless it is a plain lowercase word.
pub fn quote_name(name: &str) -> std::borrow::Cow<'_, str> {
    let plain = name.chars().next().is_some_and(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if plain {
        name.into()
    } else {
        format!("'{}'", name.replace('\\', "\\\\").replace('\'', "\\'")).into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey(String);

impl CanonicalKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Monotone source of variable ids, confined to one derivation.
#[derive(Debug, Default, Clone)]
pub struct FreshNamer {
    next: u32,
}

impl FreshNamer {
    pub fn new() -> Self {
        Self::default()
    }

    /// A namer whose ids are disjoint from every variable of `clause`.
    pub fn for_clause(clause: &Clause) -> Self {
        Self { next: clause.max_var().map_or(0, |m| m + 1) }
    }

    fn reserve_above(&mut self, id: u32) {
        self.next = self.next.max(id + 1);
    }

    pub fn fresh(&mut self) -> VarId {
        let v = VarId(self.next);
        self.next += 1;
        v
    }
}

/// The function and predicate symbols of a problem, in first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    functions: Vec<Symbol>,
    predicates: Vec<Symbol>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `sym` unless a symbol with that name is already present.
    /// Returns the conflicting symbol when the name is known with another arity or kind.
    pub fn insert(&mut self, sym: Symbol) -> Result<(), Symbol> {
        if let Some(existing) = self.get(sym.name()) {
            return if *existing == sym { Ok(()) } else { Err(existing.clone()) };
        }
        match sym.kind() {
            SymbolKind::Function => self.functions.push(sym),
            SymbolKind::Predicate => self.predicates.push(sym),
        }
        Ok(())
    }

    pub fn from_clauses<'a>(clauses: impl IntoIterator<Item = &'a Clause>) -> Result<Self, Symbol> {
        let mut sig = Self::new();
        for c in clauses {
            for s in c.symbols() {
                sig.insert(s)?;
            }
        }
        Ok(sig)
    }

    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.functions
            .iter()
            .chain(&self.predicates)
            .find(|s| s.name() == name)
    }

    pub fn function(&self, name: &str) -> Option<&Symbol> {
        self.functions.iter().find(|s| s.name() == name)
    }

    pub fn functions(&self) -> &[Symbol] {
        &self.functions
    }

    pub fn predicates(&self) -> &[Symbol] {
        &self.predicates
    }

    pub fn constants(&self) -> Vec<Symbol> {
        self.functions.iter().filter(|s| s.is_constant()).cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f() -> Symbol {
        Symbol::function("f", 2)
    }
    fn t() -> Symbol {
        Symbol::function("t", 2)
    }
    fn g() -> Symbol {
        Symbol::function("g", 1)
    }
    fn c() -> Symbol {
        Symbol::constant("c")
    }
    fn e() -> Symbol {
        Symbol::constant("e")
    }
    fn p() -> Symbol {
        Symbol::predicate("p", 1)
    }

    fn level0() -> Clause {
        let x = Term::var(0);
        let z = Term::var(1);
        Clause::input("a", vec![Literal::pred(true, p(), vec![Term::app(f(), vec![x, z])])])
    }

    #[test]
    fn variables_follow_first_occurrence() {
        assert_eq!(level0().variables_in_order(), vec![VarId(0), VarId(1)]);
        let ground = Clause::input("g", vec![Literal::pred(true, p(), vec![Term::constant("c")])]);
        assert!(ground.variables_in_order().is_empty());
        let q = Symbol::predicate("q", 3);
        let yxy = Clause::input("q", vec![Literal::pred(true, q, vec![Term::var(7), Term::var(3), Term::var(7)])]);
        assert_eq!(yxy.variables_in_order(), vec![VarId(7), VarId(3)]);
    }

    #[test]
    fn two_deepening_steps_reach_the_ground_instance() {
        let c0 = level0();
        let mut namer = FreshNamer::for_clause(&c0);
        let c1 = c0.deepen(&HeadAssignment::new(vec![t(), g()]), &mut namer).unwrap();
        assert_eq!(c1.formula_text(), "p(f(t(X0,X1),g(X2)))");
        assert_eq!(c1.level(), 1);
        assert_eq!(c1.variables_in_order().len(), 3);
        // fresh ids never collide with the parent's
        assert!(c1.variables_in_order().iter().all(|v| v.0 >= 2));

        let mut namer = FreshNamer::for_clause(&c1);
        let c2 = c1.deepen(&HeadAssignment::new(vec![c(), c(), e()]), &mut namer).unwrap();
        assert_eq!(c2.formula_text(), "p(f(t(c,c),g(e)))");
        assert!(c2.is_ground());
        assert_eq!(c2.level(), 2);
        assert_eq!(c2.root(), "a");
        match &c2.origin {
            Origin::Instance { steps, .. } => assert_eq!(steps.len(), 2),
            Origin::Input => panic!("expected an instance"),
        }
    }

    #[test]
    fn deepen_ground_clause_with_empty_assignment_is_identity() {
        let ground = Clause::input("g", vec![Literal::pred(false, p(), vec![Term::constant("c")])]);
        let out = ground.deepen(&HeadAssignment::new(vec![]), &mut FreshNamer::new()).unwrap();
        assert_eq!(out.literals, ground.literals);
    }

    #[test]
    fn deepen_rejects_coverage_mismatch_and_predicates() {
        let c0 = level0();
        let err = c0.deepen(&HeadAssignment::new(vec![t()]), &mut FreshNamer::new());
        assert!(matches!(err, Err(FolError::MalformedAssignment { .. })));
        let err = c0.deepen(&HeadAssignment::new(vec![t(), p()]), &mut FreshNamer::new());
        assert!(matches!(err, Err(FolError::MalformedAssignment { .. })));
    }

    #[test]
    fn deepen_refuses_a_third_level() {
        let c0 = level0();
        let c1 = c0.deepen(&HeadAssignment::new(vec![g(), g()]), &mut FreshNamer::new()).unwrap();
        let c2 = c1.deepen(&HeadAssignment::new(vec![g(), g()]), &mut FreshNamer::new()).unwrap();
        assert!(!c2.is_ground());
        let err = c2.deepen(&HeadAssignment::new(vec![c(), c()]), &mut FreshNamer::new());
        assert!(matches!(err, Err(FolError::LevelExceeded { .. })));
    }

    #[test]
    fn ground_checks() {
        assert!(Clause::input("e", vec![]).is_ground());
        assert!(!level0().is_ground());
    }

    #[test]
    fn canonical_key_is_alpha_equivalence() {
        let pxy = Symbol::predicate("p", 2);
        let mk = |a: u32, b: u32| {
            Clause::input("k", vec![Literal::pred(true, pxy.clone(), vec![Term::var(a), Term::var(b)])])
        };
        assert_eq!(mk(0, 1).canonical_key(), mk(5, 9).canonical_key());
        assert_ne!(mk(0, 0).canonical_key(), mk(0, 1).canonical_key());
        let fc = |name: &str| {
            Clause::input(name, vec![Literal::pred(true, p(), vec![Term::app(Symbol::function("f", 1), vec![Term::constant("c")])])])
        };
        assert_eq!(fc("a").canonical_key(), fc("b").canonical_key());
    }

    #[test]
    fn literal_order_changes_the_key() {
        let q = Symbol::predicate("q", 0);
        let a = Literal::pred(true, p(), vec![Term::constant("c")]);
        let b = Literal::pred(false, q, vec![]);
        let ab = Clause::input("x", vec![a.clone(), b.clone()]);
        let ba = Clause::input("x", vec![b, a]);
        assert_ne!(ab.canonical_key(), ba.canonical_key());
    }

    #[test]
    fn signature_rejects_arity_conflicts() {
        let mut sig = Signature::new();
        sig.insert(Symbol::function("f", 1)).unwrap();
        sig.insert(Symbol::function("f", 1)).unwrap();
        assert!(sig.insert(Symbol::function("f", 2)).is_err());
        sig.insert(c()).unwrap();
        assert_eq!(sig.constants(), vec![c()]);
    }
}
