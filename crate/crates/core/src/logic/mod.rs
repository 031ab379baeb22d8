//! First-order representation of weighted rules, grounding, and the cost
//! semantics of possible worlds.
//!
//! Weights are costs, not log-odds: a violated ground clause contributes
//! `|w|` to the cost of a world, and a hard clause contributes `+inf`.

mod ground;
mod world;

use std::collections::HashMap;
use std::fmt;

use crate::scalar::Scalar;

pub use ground::{ground, GroundAtom, GroundClause, GroundDatabase, GroundLiteral};
pub use world::{
    brute_force_map, brute_force_marginals, clause_satisfied, clause_violated, world_cost, World, MAP_ORACLE_LIMIT,
    MARGINAL_ORACLE_LIMIT,
};

pub type AtomId = usize;
pub type Sym = u32;

/// Clause weight: a finite real or the distinguished hard value `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight<T> {
    Soft(T),
    Hard,
}

impl<T: Scalar> Weight<T> {
    pub fn is_hard(&self) -> bool {
        matches!(self, Weight::Hard)
    }

    /// `|w|`, or `+inf` for hard weights.
    pub fn magnitude(&self) -> T {
        match *self {
            Weight::Soft(w) => w.abs(),
            Weight::Hard => T::infinity(),
        }
    }

    /// Positive weights (and hard ones) are violated when the clause is false.
    pub fn is_positive(&self) -> bool {
        match *self {
            Weight::Soft(w) => w > T::zero(),
            Weight::Hard => true,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self, Weight::Soft(w) if w == T::zero())
    }

    pub fn scaled(&self, factor: T) -> Self {
        match *self {
            Weight::Soft(w) => Weight::Soft(w * factor),
            Weight::Hard => Weight::Hard,
        }
    }

    pub fn negated(&self) -> Self {
        match *self {
            Weight::Soft(w) => Weight::Soft(-w),
            Weight::Hard => Weight::Hard,
        }
    }
}

impl<T: Scalar> fmt::Display for Weight<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Soft(w) => write!(f, "{w}"),
            Weight::Hard => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredicateKind {
    Evidence,
    Query,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateSchema {
    pub name: String,
    pub domains: Vec<String>,
    pub kind: PredicateKind,
}

impl PredicateSchema {
    pub fn arity(&self) -> usize {
        self.domains.len()
    }

    pub fn is_query(&self) -> bool {
        self.kind == PredicateKind::Query
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => {
                let bare = c.chars().next().is_some_and(|ch| ch.is_ascii_uppercase() || ch.is_ascii_digit())
                    && c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_');
                if bare {
                    f.write_str(c)
                } else {
                    write!(f, "\"{}\"", c.replace('\\', "\\\\").replace('"', "\\\""))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::as_var)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// A literal of a clause in disjunctive form. `in_head` records whether the
/// literal came from the consequent of an implication, which the compiler
/// uses to tell defined relations apart from features.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
    pub in_head: bool,
}

/// Equality disjunct `lhs = rhs` (or `lhs != rhs` when `equal` is false).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub lhs: Term,
    pub rhs: Term,
    pub equal: bool,
}

impl Constraint {
    pub fn negated(&self) -> Self {
        Constraint { lhs: self.lhs.clone(), rhs: self.rhs.clone(), equal: !self.equal }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.equal { "=" } else { "!=" };
        write!(f, "{} {op} {}", self.lhs, self.rhs)
    }
}

/// A weighted first-order clause `l1 v l2 v ... v c1 v ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause<T> {
    pub weight: Weight<T>,
    pub literals: Vec<Literal>,
    pub constraints: Vec<Constraint>,
}

impl<T> Clause<T> {
    pub fn vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let terms =
            self.literals.iter().flat_map(|l| l.atom.args.iter()).chain(self.constraints.iter().flat_map(|c| [&c.lhs, &c.rhs]));
        for t in terms {
            if let Term::Var(v) = t {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    pub fn mentions(&self, predicate: &str) -> bool {
        self.literals.iter().any(|l| l.atom.predicate == predicate)
    }
}

/// Interned constants.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Symbols {
    names: Vec<String>,
    index: HashMap<String, Sym>,
}

impl Symbols {
    pub fn intern(&mut self, name: &str) -> Sym {
        if let Some(&s) = self.index.get(name) {
            return s;
        }
        let s = self.names.len() as Sym;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), s);
        s
    }

    pub fn get(&self, name: &str) -> Option<Sym> {
        self.index.get(name).copied()
    }

    pub fn name(&self, s: Sym) -> &str {
        &self.names[s as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}
