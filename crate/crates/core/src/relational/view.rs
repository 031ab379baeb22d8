use std::fmt;

use crate::error::{Error, Result};
use crate::logic::Sym;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Adornment {
    Bound,
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VTerm {
    Var(String),
    Const(Sym),
}

impl VTerm {
    pub fn var(name: &str) -> Self {
        VTerm::Var(name.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgoal {
    pub relation: String,
    pub args: Vec<VTerm>,
}

impl Subgoal {
    pub fn new(relation: &str, vars: &[&str]) -> Self {
        Subgoal { relation: relation.to_string(), args: vars.iter().map(|v| VTerm::var(v)).collect() }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|a| match a {
            VTerm::Var(v) => Some(v.as_str()),
            VTerm::Const(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewConstraint {
    pub lhs: VTerm,
    pub rhs: VTerm,
    pub equal: bool,
}

/// A conjunctive query `name^adornment(head) <- body, constraints` probed
/// an estimated `t` times.
#[derive(Debug, Clone, PartialEq)]
pub struct AdornedView {
    pub name: String,
    pub head: Vec<String>,
    pub adornment: Vec<Adornment>,
    pub body: Vec<Subgoal>,
    pub constraints: Vec<ViewConstraint>,
    pub t: f64,
}

impl AdornedView {
    /// `adornment` is a string over `b`/`f`, one letter per head variable.
    pub fn new(name: &str, head: &[&str], adornment: &str, body: Vec<Subgoal>) -> Result<Self> {
        let adornment: Vec<Adornment> = adornment
            .chars()
            .map(|c| match c {
                'b' => Ok(Adornment::Bound),
                'f' => Ok(Adornment::Free),
                _ => Err(Error::Model(format!("bad adornment letter `{c}`"))),
            })
            .collect::<Result<_>>()?;
        if adornment.len() != head.len() {
            return Err(Error::Model("adornment length differs from head arity".into()));
        }
        let v = AdornedView {
            name: name.to_string(),
            head: head.iter().map(|s| s.to_string()).collect(),
            adornment,
            body,
            constraints: Vec::new(),
            t: 1.0,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_constraint(mut self, lhs: VTerm, rhs: VTerm, equal: bool) -> Self {
        self.constraints.push(ViewConstraint { lhs, rhs, equal });
        self
    }

    pub fn validate(&self) -> Result<()> {
        for h in &self.head {
            if !self.body.iter().any(|s| s.vars().any(|v| v == h)) {
                return Err(Error::UnboundHeadVariable(h.clone()));
            }
        }
        for c in &self.constraints {
            for t in [&c.lhs, &c.rhs] {
                if let VTerm::Var(v) = t {
                    if !self.body.iter().any(|s| s.vars().any(|x| x == v)) {
                        return Err(Error::UnboundHeadVariable(v.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Same view with every head position free.
    pub fn all_free(&self) -> Self {
        let mut v = self.clone();
        v.adornment = vec![Adornment::Free; v.head.len()];
        v
    }

    pub fn bound_positions(&self) -> Vec<usize> {
        (0..self.head.len()).filter(|&i| self.adornment[i] == Adornment::Bound).collect()
    }

    pub fn free_positions(&self) -> Vec<usize> {
        (0..self.head.len()).filter(|&i| self.adornment[i] == Adornment::Free).collect()
    }

    /// Variables in order of first occurrence in the body.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.body {
            for v in s.vars() {
                if !out.iter().any(|o| o == v) {
                    out.push(v.to_string());
                }
            }
        }
        out
    }

    pub fn adornment_string(&self) -> String {
        self.adornment.iter().map(|a| if *a == Adornment::Bound { 'b' } else { 'f' }).collect()
    }
}

impl fmt::Display for AdornedView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let term = |t: &VTerm| match t {
            VTerm::Var(v) => v.clone(),
            VTerm::Const(c) => format!("#{c}"),
        };
        write!(f, "{}^{}({}) <- ", self.name, self.adornment_string(), self.head.join(", "))?;
        let mut parts: Vec<String> = self
            .body
            .iter()
            .map(|s| format!("{}({})", s.relation, s.args.iter().map(term).collect::<Vec<_>>().join(", ")))
            .collect();
        for c in &self.constraints {
            parts.push(format!("{} {} {}", term(&c.lhs), if c.equal { "=" } else { "!=" }, term(&c.rhs)));
        }
        f.write_str(&parts.join(", "))
    }
}
