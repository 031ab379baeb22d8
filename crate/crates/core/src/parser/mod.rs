//! Text formats for programs (`.mln`) and evidence (`.db`).
//!
//! A program file holds optional domain declarations, predicate schemas and
//! weighted rules:
//!
//! ```text
//! // persons are open, orgs are closed
//! org = {MIT, "Stanford Univ."}
//! coOccurs(per, org)
//! *affil(per, org)
//! 3: coOccurs(p, o) => affil(p, o)
//! inf: affil(p, o1), affil(p, o2) => o1 = o2
//! ```
//!
//! A line `@task <name> [coref|classification|chain|generic]` pins every
//! following rule to a named task until the next `@task` or `@auto` line.

mod lexer;
mod print;

use std::collections::{BTreeMap, BTreeSet};

use crate::compiler::TaskKind;
use crate::error::{Error, Result};
use crate::logic::{Atom, Clause, Constraint, Literal, PredicateKind, PredicateSchema, Term, Weight};
use crate::scalar::Scalar;

use lexer::{Lexer, Tok};
pub use print::{print_evidence, print_program};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Domain {
    /// Closed domains reject constants outside the declared set.
    pub declared: bool,
    pub constants: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EvidenceAtom {
    pub predicate: String,
    pub args: Vec<String>,
    pub truth: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskAnnotation {
    pub name: String,
    pub kind: TaskKind,
}

/// One side item of a formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Lit { positive: bool, atom: Atom },
    Cmp(Constraint),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    /// `b1, b2, ... => h1 v h2 v ...`
    Implies { body: Vec<Item>, head: Vec<Item> },
    /// `a <=> b`
    Iff(Item, Item),
    /// `l1 v l2 v ...`
    Or(Vec<Item>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule<T> {
    /// Position in source order.
    pub index: usize,
    pub weight: Weight<T>,
    pub formula: Formula,
    pub clauses: Vec<Clause<T>>,
    pub task: Option<TaskAnnotation>,
}

impl<T: Scalar> Rule<T> {
    pub fn is_hard(&self) -> bool {
        self.weight.is_hard()
    }

    pub fn mentions(&self, predicate: &str) -> bool {
        self.clauses.iter().any(|c| c.mentions(predicate))
    }

    /// True if `predicate` occurs in the consequent of some expanded clause.
    pub fn defines(&self, predicate: &str) -> bool {
        self.clauses.iter().flat_map(|c| &c.literals).any(|l| l.in_head && l.atom.predicate == predicate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlnProgram<T> {
    pub schemas: Vec<PredicateSchema>,
    pub domains: BTreeMap<String, Domain>,
    pub rules: Vec<Rule<T>>,
    pub evidence: Vec<EvidenceAtom>,
}

impl<T> Default for MlnProgram<T> {
    fn default() -> Self {
        MlnProgram { schemas: Vec::new(), domains: BTreeMap::new(), rules: Vec::new(), evidence: Vec::new() }
    }
}

impl<T: Scalar> MlnProgram<T> {
    pub fn schema(&self, name: &str) -> Option<&PredicateSchema> {
        self.schemas.iter().find(|s| s.name == name)
    }

    pub fn query_relations(&self) -> impl Iterator<Item = &PredicateSchema> {
        self.schemas.iter().filter(|s| s.is_query())
    }

    /// Adds `constant` to the domain of `predicate`'s argument `pos`.
    fn observe(&mut self, predicate: &str, pos: usize, constant: &str) -> Result<()> {
        let schema = self.schema(predicate).expect("checked by caller");
        let dom = schema.domains[pos].clone();
        let entry = self.domains.entry(dom.clone()).or_default();
        if entry.declared {
            if !entry.constants.contains(constant) {
                return Err(Error::ConstantNotInDomain { constant: constant.to_string(), domain: dom });
            }
        } else {
            entry.constants.insert(constant.to_string());
        }
        Ok(())
    }

    fn check_atom(&self, predicate: &str, arity: usize) -> Result<&PredicateSchema> {
        let schema = self.schema(predicate).ok_or_else(|| Error::UnknownPredicate(predicate.to_string()))?;
        if schema.arity() != arity {
            return Err(Error::ArityMismatch { name: predicate.to_string(), expected: schema.arity(), got: arity });
        }
        Ok(schema)
    }

    /// Appends evidence parsed from `text` to this program.
    pub fn add_evidence(&mut self, text: &str) -> Result<()> {
        let mut lx = Lexer::new(text)?;
        loop {
            lx.skip_newlines();
            if lx.peek() == &Tok::Eof {
                return Ok(());
            }
            let truth = !lx.eat(&Tok::Bang);
            let (name, _) = lx.ident()?;
            let (line, col) = lx.position();
            lx.expect(&Tok::LParen)?;
            let mut args = Vec::new();
            loop {
                args.push(lx.constant()?);
                if !lx.eat(&Tok::Comma) {
                    break;
                }
            }
            lx.expect(&Tok::RParen)?;
            lx.end_of_line()?;
            let schema = self.check_atom(&name, args.len()).map_err(|e| match e {
                Error::UnknownPredicate(_) | Error::ArityMismatch { .. } => e,
                _ => Error::Syntax { line, col, msg: e.to_string() },
            })?;
            if schema.is_query() {
                return Err(Error::QueryEvidence(name));
            }
            for (i, a) in args.iter().enumerate() {
                self.observe(&name, i, a)?;
            }
            self.evidence.push(EvidenceAtom { predicate: name, args, truth });
        }
    }
}

/// Parses a program file (schemas, domain declarations and rules).
pub fn parse_program<T: Scalar>(text: &str) -> Result<MlnProgram<T>> {
    let mut prog = MlnProgram::default();
    let mut lx = Lexer::new(text)?;
    let mut task: Option<TaskAnnotation> = None;
    loop {
        lx.skip_newlines();
        match lx.peek().clone() {
            Tok::Eof => break,
            Tok::At => {
                lx.next();
                let (word, _) = lx.ident()?;
                match word.as_str() {
                    "auto" => task = None,
                    "task" => {
                        let (name, _) = lx.any_name()?;
                        let kind = if lx.peek() == &Tok::Newline || lx.peek() == &Tok::Eof {
                            TaskKind::Generic
                        } else {
                            let (k, (line, col)) = lx.ident()?;
                            TaskKind::from_annotation(&k).ok_or_else(|| Error::Syntax {
                                line,
                                col,
                                msg: format!("unknown task kind `{k}`"),
                            })?
                        };
                        task = Some(TaskAnnotation { name, kind });
                    }
                    other => return Err(lx.error(format!("unknown directive `@{other}`"))),
                }
                lx.end_of_line()?;
            }
            Tok::Number(_) | Tok::Minus => parse_rule(&mut lx, &mut prog, &task)?,
            Tok::Ident(ref w) if w == "inf" => parse_rule(&mut lx, &mut prog, &task)?,
            Tok::Star => {
                lx.next();
                parse_schema(&mut lx, &mut prog, PredicateKind::Query)?;
            }
            Tok::Ident(_) => {
                if lx.peek2() == &Tok::Eq {
                    parse_domain(&mut lx, &mut prog)?;
                } else {
                    parse_schema(&mut lx, &mut prog, PredicateKind::Evidence)?;
                }
            }
            other => return Err(lx.error(format!("unexpected {}", other.describe()))),
        }
    }
    Ok(prog)
}

/// Parses a program file and then an evidence file against it.
pub fn parse_with_evidence<T: Scalar>(program: &str, evidence: &str) -> Result<MlnProgram<T>> {
    let mut p = parse_program(program)?;
    p.add_evidence(evidence)?;
    Ok(p)
}

fn parse_domain<T: Scalar>(lx: &mut Lexer, prog: &mut MlnProgram<T>) -> Result<()> {
    let (name, _) = lx.ident()?;
    lx.expect(&Tok::Eq)?;
    lx.expect(&Tok::LBrace)?;
    let mut constants = BTreeSet::new();
    if !lx.eat(&Tok::RBrace) {
        loop {
            constants.insert(lx.constant()?);
            if !lx.eat(&Tok::Comma) {
                break;
            }
        }
        lx.expect(&Tok::RBrace)?;
    }
    lx.end_of_line()?;
    let entry = prog.domains.entry(name.clone()).or_default();
    if let Some(c) = entry.constants.iter().find(|c| !constants.contains(*c)) {
        return Err(Error::ConstantNotInDomain { constant: c.clone(), domain: name });
    }
    entry.declared = true;
    entry.constants = constants;
    Ok(())
}

fn parse_schema<T: Scalar>(lx: &mut Lexer, prog: &mut MlnProgram<T>, kind: PredicateKind) -> Result<()> {
    let (name, _) = lx.ident()?;
    lx.expect(&Tok::LParen)?;
    let mut domains = Vec::new();
    loop {
        domains.push(lx.ident()?.0);
        if !lx.eat(&Tok::Comma) {
            break;
        }
    }
    lx.expect(&Tok::RParen)?;
    lx.end_of_line()?;
    if prog.schema(&name).is_some() {
        return Err(Error::DuplicateSchema(name));
    }
    for d in &domains {
        prog.domains.entry(d.clone()).or_default();
    }
    prog.schemas.push(PredicateSchema { name, domains, kind });
    Ok(())
}

fn parse_weight<T: Scalar>(lx: &mut Lexer) -> Result<Weight<T>> {
    let (line, col) = lx.position();
    let negative = lx.eat(&Tok::Minus);
    let w = match lx.next() {
        Tok::Ident(w) if w == "inf" => {
            if negative {
                return Err(Error::Weight("negative hard weights are not allowed".into()));
            }
            Weight::Hard
        }
        Tok::Number(n) => {
            let v: f64 = n.parse().map_err(|_| Error::Weight(format!("`{n}` at {line}:{col}")))?;
            if !v.is_finite() {
                return Err(Error::Weight(format!("`{n}` at {line}:{col}")));
            }
            Weight::Soft(T::of(if negative { -v } else { v }))
        }
        other => return Err(Error::Syntax { line, col, msg: format!("expected weight, found {}", other.describe()) }),
    };
    Ok(w)
}

fn parse_rule<T: Scalar>(lx: &mut Lexer, prog: &mut MlnProgram<T>, task: &Option<TaskAnnotation>) -> Result<()> {
    let weight = parse_weight::<T>(lx)?;
    lx.expect(&Tok::Colon)?;
    let first = parse_items(lx, prog, &Tok::Comma)?;
    let formula = match lx.peek() {
        Tok::Implies => {
            lx.next();
            let head = parse_items(lx, prog, &Tok::Or)?;
            Formula::Implies { body: first, head }
        }
        Tok::Iff => {
            lx.next();
            let rhs = parse_items(lx, prog, &Tok::Or)?;
            if first.len() != 1 || rhs.len() != 1 {
                return Err(lx.error("`<=>` takes a single item on each side".into()));
            }
            Formula::Iff(first.into_iter().next().unwrap(), rhs.into_iter().next().unwrap())
        }
        _ => {
            // Without `=>`, a top-level `,` would mean conjunction, which
            // is not a clause.
            if first.len() > 1 {
                return Err(lx.error("`,` is only allowed left of `=>`; use `v` for disjunction".into()));
            }
            let mut items = first;
            while lx.eat(&Tok::Or) {
                items.push(parse_item(lx, prog)?);
            }
            Formula::Or(items)
        }
    };
    lx.end_of_line()?;
    let clauses = expand(weight, &formula);
    for c in &clauses {
        let lit_vars: BTreeSet<String> = c.literals.iter().flat_map(|l| l.atom.vars()).map(str::to_string).collect();
        for k in &c.constraints {
            for t in [&k.lhs, &k.rhs] {
                if let Term::Var(v) = t {
                    if !lit_vars.contains(v) {
                        return Err(lx.error(format!("variable `{v}` occurs only in a constraint")));
                    }
                }
            }
        }
    }
    let index = prog.rules.len();
    prog.rules.push(Rule { index, weight, formula, clauses, task: task.clone() });
    Ok(())
}

/// Items separated by `sep` (`,` or `v`).
fn parse_items<T: Scalar>(lx: &mut Lexer, prog: &mut MlnProgram<T>, sep: &Tok) -> Result<Vec<Item>> {
    let mut items = vec![parse_item(lx, prog)?];
    while lx.eat(sep) {
        items.push(parse_item(lx, prog)?);
    }
    Ok(items)
}

fn parse_item<T: Scalar>(lx: &mut Lexer, prog: &mut MlnProgram<T>) -> Result<Item> {
    let negated = lx.eat(&Tok::Bang);
    let is_atom = matches!(lx.peek(), Tok::Ident(_)) && lx.peek2() == &Tok::LParen;
    if is_atom {
        let (line, col) = lx.position();
        let (name, _) = lx.ident()?;
        lx.expect(&Tok::LParen)?;
        let mut args = Vec::new();
        loop {
            args.push(lx.term()?);
            if !lx.eat(&Tok::Comma) {
                break;
            }
        }
        lx.expect(&Tok::RParen)?;
        prog.check_atom(&name, args.len()).map_err(|e| match e {
            Error::UnknownPredicate(_) => Error::Syntax { line, col, msg: e.to_string() },
            other => other,
        })?;
        for (i, a) in args.iter().enumerate() {
            if let Term::Const(c) = a {
                prog.observe(&name, i, c)?;
            }
        }
        return Ok(Item::Lit { positive: !negated, atom: Atom { predicate: name, args } });
    }
    if negated {
        return Err(lx.error("`!` must precede an atom".into()));
    }
    let lhs = lx.term()?;
    let equal = match lx.next() {
        Tok::Eq => true,
        Tok::Neq => false,
        other => return Err(lx.error(format!("expected `=` or `!=`, found {}", other.describe()))),
    };
    let rhs = lx.term()?;
    Ok(Item::Cmp(Constraint { lhs, rhs, equal }))
}

fn push_item<T>(clause: &mut Clause<T>, item: &Item, negate: bool, in_head: bool) {
    match item {
        Item::Lit { positive, atom } => {
            clause.literals.push(Literal { positive: *positive != negate, atom: atom.clone(), in_head })
        }
        Item::Cmp(c) => clause.constraints.push(if negate { c.negated() } else { c.clone() }),
    }
}

/// Rewrites a formula into disjunctive clauses. `a <=> b` becomes
/// `!a v b` and `a v !b`, each with the full weight.
pub fn expand<T: Scalar>(weight: Weight<T>, formula: &Formula) -> Vec<Clause<T>> {
    let empty = || Clause { weight, literals: Vec::new(), constraints: Vec::new() };
    match formula {
        Formula::Implies { body, head } => {
            let mut c = empty();
            for b in body {
                push_item(&mut c, b, true, false);
            }
            for h in head {
                push_item(&mut c, h, false, true);
            }
            vec![c]
        }
        Formula::Iff(a, b) => {
            let mut c1 = empty();
            push_item(&mut c1, a, true, false);
            push_item(&mut c1, b, false, true);
            let mut c2 = empty();
            push_item(&mut c2, b, true, false);
            push_item(&mut c2, a, false, true);
            vec![c1, c2]
        }
        Formula::Or(items) => {
            let mut c = empty();
            for i in items {
                push_item(&mut c, i, false, true);
            }
            vec![c]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const AFFIL: &str = include_str!("../../tests/fixtures/affiliation.mln");

    #[test]
    fn implication_rule() {
        let p: MlnProgram<f64> =
            parse_program("pSimHard(per, per)\n*pCoref(per, per)\n6: pSimHard(p1,p2) => pCoref(p1,p2)\n").unwrap();
        assert_eq!(p.rules.len(), 1);
        let c = &p.rules[0].clauses;
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].weight, Weight::Soft(6.0));
        assert_eq!(c[0].literals.len(), 2);
        assert!(!c[0].literals[0].positive && c[0].literals[1].positive);
    }

    #[test]
    fn hard_transitivity() {
        let p: MlnProgram<f64> = parse_program("*pCoref(per, per)\ninf: pCoref(x,y), pCoref(y,z) => pCoref(x,z)").unwrap();
        assert!(p.rules[0].is_hard());
        assert_eq!(p.rules[0].clauses[0].literals.len(), 3);
    }

    #[test]
    fn empty_file() {
        let p: MlnProgram<f64> = parse_program("").unwrap();
        assert!(p.schemas.is_empty() && p.rules.is_empty());
    }

    #[test]
    fn affiliation_parses() {
        let p: MlnProgram<f64> = parse_program(AFFIL).unwrap();
        assert_eq!(p.rules.len(), 9);
        assert_eq!(p.query_relations().count(), 3);
    }

    #[test]
    fn evidence_lines() {
        let mut p: MlnProgram<f64> = parse_program("coOccurs(per, org)\nhomepage(per, page)\n").unwrap();
        p.add_evidence("coOccurs(\"Jeff Ullman\", \"Stanford\")\n!homepage(Joe, Doc202)\n").unwrap();
        assert_eq!(p.evidence.len(), 2);
        assert_eq!(p.evidence[0].args, vec!["Jeff Ullman", "Stanford"]);
        assert!(!p.evidence[1].truth);
    }

    #[test]
    fn malformed_evidence_position() {
        let mut p: MlnProgram<f64> = parse_program("faculty(org)\n").unwrap();
        match p.add_evidence("\nfaculty(MIT").unwrap_err() {
            Error::Syntax { line, col, .. } => assert_eq!((line, col), (2, 12)),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn query_evidence_rejected() {
        let mut p: MlnProgram<f64> = parse_program("*affil(per, org)\n").unwrap();
        assert_eq!(p.add_evidence("affil(A, B)").unwrap_err(), Error::QueryEvidence("affil".into()));
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_program::<f64>("p(a)\np(b)"), Err(Error::DuplicateSchema(_))));
        assert!(matches!(parse_program::<f64>("*p(a)\n-inf: p(x)"), Err(Error::Weight(_))));
        assert!(matches!(parse_program::<f64>("*p(a)\n1: q(x)"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_program::<f64>("*p(a)\n1: p(x, y)"), Err(Error::ArityMismatch { .. })));
        assert!(matches!(parse_program::<f64>("*p(a)\nx1: p(x)"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_program::<f64>("*p(a)\n1: p(x), p(y)"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn closed_domain() {
        let mut p: MlnProgram<f64> = parse_program("org = {MIT, \"UC Berkeley\"}\nfaculty(org)\n").unwrap();
        p.add_evidence("faculty(MIT)").unwrap();
        assert!(matches!(p.add_evidence("faculty(CMU)"), Err(Error::ConstantNotInDomain { .. })));
    }

    #[test]
    fn biconditional_expands_to_two() {
        let p: MlnProgram<f64> = parse_program("*Happy(per)\n*Sad(per)\n5: Happy(p) <=> !Sad(p)").unwrap();
        let c = &p.rules[0].clauses;
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|c| c.weight == Weight::Soft(5.0)));
        // !Happy v !Sad, then Sad v Happy
        assert_eq!(c[0].literals.iter().map(|l| l.positive).collect::<Vec<_>>(), vec![false, false]);
        assert_eq!(c[1].literals.iter().map(|l| l.positive).collect::<Vec<_>>(), vec![true, true]);
    }

    #[test]
    fn task_annotations() {
        let p: MlnProgram<f64> =
            parse_program("*p(a)\n@task one classification\n1: p(x)\n@task two\n2: !p(x)\n@auto\n3: p(x)").unwrap();
        assert_eq!(p.rules[0].task.as_ref().unwrap().kind, TaskKind::SimpleClassification);
        assert_eq!(p.rules[1].task.as_ref().unwrap().name, "two");
        assert!(p.rules[2].task.is_none());
    }
}
