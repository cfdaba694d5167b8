//! Reader and writer for the `cnf(name, role, formula).` dialect.
//!
//! Supported: disjunctions of literals, `~` negation, `=` / `!=`, variables
//! with an uppercase (or `_`) initial, lowercase and single-quoted names,
//! `$false`, `%` and `/* */` comments, and an ignored trailing annotation.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::fol::{quote_name, Atom, Clause, Literal, Signature, Symbol, SymbolKind, Term, VarId};

/// Separator between the family part and the variant part of a file stem.
pub const FAMILY_SEPARATOR: &str = "__";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{line}:{column}: symbol {name} used with arity {found}, previously {expected}")]
    ArityConflict { line: usize, column: usize, name: String, expected: String, found: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub name: String,
    pub family: String,
    pub clauses: Vec<Clause>,
    pub signature: Signature,
}

impl Problem {
    /// Builds a problem, deriving the signature from the clauses.
    pub fn new(name: &str, clauses: Vec<Clause>) -> Result<Self, Symbol> {
        let signature = Signature::from_clauses(&clauses)?;
        Ok(Self { name: name.to_string(), family: family_of(name).to_string(), clauses, signature })
    }

    pub fn from_file(path: &Path) -> Result<Self, ParseError> {
        let text = std::fs::read_to_string(path).map_err(|e| ParseError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut problem = parse_cnf(&text)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("problem");
        problem.name = stem.to_string();
        problem.family = family_of(stem).to_string();
        Ok(problem)
    }

    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| &*c.name == name)
    }

    pub fn ground_clauses(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| c.is_ground())
    }
}

/// The family of a problem name: everything before the first `__`.
pub fn family_of(name: &str) -> &str {
    match name.find(FAMILY_SEPARATOR) {
        Some(0) | None => name,
        Some(i) => &name[..i],
    }
}

/// Loads every `.p` file of a directory, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<Problem>, ParseError> {
    let io = |e: std::io::Error| ParseError::Io { path: dir.display().to_string(), message: e.to_string() };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "p"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Problem::from_file(p)).collect()
}

pub fn parse_cnf(text: &str) -> Result<Problem, ParseError> {
    let mut parser = Parser::new(text);
    let mut clauses = Vec::new();
    let mut name = None;
    let mut family = None;
    loop {
        parser.skip_trivia(&mut |line| {
            if let Some(v) = line.strip_prefix("problem:") {
                name = Some(v.trim().to_string());
            } else if let Some(v) = line.strip_prefix("family:") {
                family = Some(v.trim().to_string());
            }
        });
        if parser.at_end() {
            break;
        }
        clauses.push(parser.cnf()?);
    }
    let name = name.unwrap_or_else(|| "problem".to_string());
    let family = family.unwrap_or_else(|| family_of(&name).to_string());
    Ok(Problem { name, family, clauses, signature: parser.signature })
}

/// Parses a bare disjunction such as `~p(X) | a = b`.
pub fn parse_formula(text: &str) -> Result<Vec<Literal>, ParseError> {
    let mut parser = Parser::new(text);
    let lits = parser.disjunction()?;
    parser.skip_trivia(&mut |_| {});
    if !parser.at_end() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(lits)
}

/// Parses a bare formula and checks its symbols against a signature.
pub fn parse_formula_in(text: &str, signature: &Signature) -> Result<Vec<Literal>, ParseError> {
    let mut parser = Parser::new(text);
    parser.signature = signature.clone();
    let lits = parser.disjunction()?;
    parser.skip_trivia(&mut |_| {});
    if !parser.at_end() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(lits)
}

pub fn serialize_cnf(problem: &Problem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "% problem: {}", problem.name);
    let _ = writeln!(out, "% family: {}", problem.family);
    for clause in &problem.clauses {
        let _ = writeln!(out, "{}", clause_line(clause));
    }
    out
}

/// One `cnf(...)` line with canonical variable names.
pub fn clause_line(clause: &Clause) -> String {
    format!("cnf({}, {}, {}).", quote_name(&clause.name), clause.role, clause.formula_text())
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    signature: Signature,
    vars: HashMap<String, VarId>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self { src: text.as_bytes(), pos: 0, signature: Signature::new(), vars: HashMap::new() }
    }

    fn line_col(&self, pos: usize) -> (usize, usize) {
        let before = &self.src[..pos.min(self.src.len())];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let col = pos - before.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1) + 1;
        (line, col)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let (line, column) = self.line_col(self.pos);
        ParseError::Syntax { line, column, message: message.into() }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    /// Skips whitespace and comments; `%` comment bodies go to `on_comment`.
    fn skip_trivia(&mut self, on_comment: &mut dyn FnMut(&str)) {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'%') => {
                    let start = self.pos + 1;
                    while self.peek().is_some_and(|b| b != b'\n') {
                        self.pos += 1;
                    }
                    let body = String::from_utf8_lossy(&self.src[start..self.pos]);
                    on_comment(body.trim());
                }
                Some(b'/') if self.src.get(self.pos + 1) == Some(&b'*') => {
                    self.pos += 2;
                    while !self.at_end() && !self.src[self.pos..].starts_with(b"*/") {
                        self.pos += 1;
                    }
                    self.pos = (self.pos + 2).min(self.src.len());
                }
                _ => return,
            }
        }
    }

    fn ws(&mut self) {
        self.skip_trivia(&mut |_| {});
    }

    fn eat(&mut self, token: &str) -> bool {
        self.ws();
        if self.src[self.pos..].starts_with(token.as_bytes()) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), ParseError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    /// A word: alphanumeric/underscore run, or a single-quoted name.
    fn word(&mut self) -> Result<(String, usize), ParseError> {
        self.word_quoted().map(|(w, start, _)| (w, start))
    }

    /// Like [`Self::word`], also reporting whether the name was quoted.
    fn word_quoted(&mut self) -> Result<(String, usize, bool), ParseError> {
        self.ws();
        let start = self.pos;
        if self.peek() == Some(b'\'') {
            self.pos += 1;
            let mut out = Vec::new();
            loop {
                match self.peek() {
                    None => return Err(self.error("unterminated quoted name")),
                    Some(b'\\') => {
                        if let Some(&b) = self.src.get(self.pos + 1) {
                            out.push(b);
                        }
                        self.pos += 2;
                    }
                    Some(b'\'') => {
                        self.pos += 1;
                        break;
                    }
                    Some(b) => {
                        out.push(b);
                        self.pos += 1;
                    }
                }
            }
            let name = String::from_utf8(out).map_err(|_| self.error("invalid UTF-8 in name"))?;
            if name.is_empty() {
                return Err(self.error("empty quoted name"));
            }
            return Ok((name, start, true));
        }
        while self.peek().is_some_and(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'$') {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected a name"));
        }
        Ok((String::from_utf8_lossy(&self.src[start..self.pos]).into_owned(), start, false))
    }

    fn cnf(&mut self) -> Result<Clause, ParseError> {
        let (kw, _) = self.word()?;
        if kw != "cnf" {
            return Err(self.error(format!("expected `cnf`, found `{kw}`")));
        }
        self.expect("(")?;
        let (name, _) = self.word()?;
        self.expect(",")?;
        let (role, _) = self.word()?;
        self.expect(",")?;
        self.vars.clear();
        let literals = self.disjunction()?;
        if self.eat(",") {
            self.skip_annotation()?;
        }
        self.expect(")")?;
        self.expect(".")?;
        Ok(Clause::input(&name, literals).with_role(&role))
    }

    fn skip_annotation(&mut self) -> Result<(), ParseError> {
        let mut depth = 0usize;
        loop {
            match self.peek() {
                None => return Err(self.error("unterminated annotation")),
                Some(b'(') | Some(b'[') => depth += 1,
                Some(b')') | Some(b']') if depth == 0 => return Ok(()),
                Some(b')') | Some(b']') => depth -= 1,
                Some(b'\'') => {
                    self.word()?;
                    continue;
                }
                _ => {}
            }
            self.pos += 1;
        }
    }

    fn disjunction(&mut self) -> Result<Vec<Literal>, ParseError> {
        self.ws();
        let save = self.pos;
        if self.eat("(") {
            // either a parenthesised disjunction or a parenthesised first literal
            if let Ok(lits) = self.disjunction_body() {
                if self.eat(")") {
                    self.ws();
                    if !self.src[self.pos..].starts_with(b"|") {
                        return Ok(lits);
                    }
                }
            }
            self.pos = save;
        }
        self.disjunction_body()
    }

    fn disjunction_body(&mut self) -> Result<Vec<Literal>, ParseError> {
        let mut lits = Vec::new();
        loop {
            if let Some(lit) = self.literal()? {
                lits.push(lit);
            }
            if !self.eat("|") {
                return Ok(lits);
            }
        }
    }

    /// `None` for `$false`.
    fn literal(&mut self) -> Result<Option<Literal>, ParseError> {
        if self.eat("~") {
            let lit = self.literal()?.ok_or_else(|| self.error("negated $false is not supported"))?;
            return Ok(Some(lit.negated()));
        }
        self.ws();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let lit = self.literal()?;
            self.expect(")")?;
            return Ok(lit);
        }
        let (head, start, quoted) = self.word_quoted()?;
        if head == "$false" && !quoted {
            return Ok(None);
        }
        if head.starts_with('$') && !quoted {
            return Err(self.error(format!("unsupported defined symbol {head}")));
        }
        let args = self.args()?;
        if self.eat("!=") {
            let left = self.make_term(head, args, start, quoted)?;
            let right = self.term()?;
            return Ok(Some(Literal::eq(false, left, right)));
        }
        if self.eat("=") {
            let left = self.make_term(head, args, start, quoted)?;
            let right = self.term()?;
            return Ok(Some(Literal::eq(true, left, right)));
        }
        if !quoted && is_variable(&head) {
            return Err(self.error(format!("variable {head} used as an atom")));
        }
        let sym = self.declare(Symbol::predicate(head.as_str(), args.len()), start)?;
        Ok(Some(Literal::pos(Atom::Pred(sym, args))))
    }

    fn args(&mut self) -> Result<Vec<Term>, ParseError> {
        self.ws();
        let mut args = Vec::new();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            loop {
                args.push(self.term()?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        Ok(args)
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let (head, start, quoted) = self.word_quoted()?;
        let args = self.args()?;
        self.make_term(head, args, start, quoted)
    }

    fn make_term(&mut self, head: String, args: Vec<Term>, start: usize, quoted: bool) -> Result<Term, ParseError> {
        if !quoted && is_variable(&head) {
            if !args.is_empty() {
                return Err(self.error(format!("variable {head} applied to arguments")));
            }
            let next = VarId(self.vars.len() as u32);
            return Ok(Term::Var(*self.vars.entry(head).or_insert(next)));
        }
        if head.starts_with('$') && !quoted {
            return Err(self.error(format!("unsupported defined symbol {head}")));
        }
        let sym = self.declare(Symbol::function(head.as_str(), args.len()), start)?;
        Ok(Term::App(sym, args))
    }

    fn declare(&mut self, sym: Symbol, at: usize) -> Result<Symbol, ParseError> {
        match self.signature.insert(sym.clone()) {
            Ok(()) => Ok(sym),
            Err(existing) => {
                let (line, column) = self.line_col(at);
                let describe = |s: &Symbol| {
                    let kind = match s.kind() {
                        SymbolKind::Function => "function",
                        SymbolKind::Predicate => "predicate",
                    };
                    format!("{} ({kind})", s.arity())
                };
                Err(ParseError::ArityConflict {
                    line,
                    column,
                    name: sym.name().to_string(),
                    expected: describe(&existing),
                    found: describe(&sym),
                })
            }
        }
    }
}

fn is_variable(word: &str) -> bool {
    word.chars().next().is_some_and(|c| c.is_ascii_uppercase() || c == '_')
}
