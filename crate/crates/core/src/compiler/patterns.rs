use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::logic::{Clause, Literal, Term};
use crate::parser::{Formula, MlnProgram, Rule};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    Ref,
    Sym,
    Trn,
    Key,
    NoRec,
    TrRec,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Ref => "REF",
            Property::Sym => "SYM",
            Property::Trn => "TRN",
            Property::Key => "KEY",
            Property::NoRec => "NoREC",
            Property::TrRec => "TrREC",
        })
    }
}

/// Functional dependency `key -> value` declared by a hard rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyInfo {
    pub key: Vec<usize>,
    pub value: usize,
    pub rule: usize,
}

/// A recursion `R(.., y, ..), T(.., y, .., z, ..) => R(.., z, ..)` where the
/// two `R` atoms differ only at `position`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recursion {
    pub rule: usize,
    pub link: String,
    pub position: usize,
    /// Position of `y` and `z` in the link relation.
    pub from: usize,
    pub to: usize,
    /// Other link positions, each paired with the `R` position it shares a
    /// variable with.
    pub context: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationInfo {
    pub name: String,
    pub properties: BTreeSet<Property>,
    pub key: Option<KeyInfo>,
    pub recursions: Vec<Recursion>,
    /// Rules with the relation in a consequent.
    pub defining_rules: Vec<usize>,
    /// Hard rules matched by the REF, SYM, TRN or KEY patterns.
    pub structural_rules: Vec<usize>,
}

impl RelationInfo {
    pub fn has(&self, p: Property) -> bool {
        self.properties.contains(&p)
    }
}

fn var(t: &Term) -> Option<&str> {
    t.as_var()
}

fn only_literals_of<'a, T>(c: &'a Clause<T>, rel: &str) -> Option<&'a [Literal]> {
    (c.literals.iter().all(|l| l.atom.predicate == rel)).then_some(&c.literals[..])
}

fn is_ref<T: Scalar>(c: &Clause<T>, rel: &str) -> bool {
    let Some(lits) = only_literals_of(c, rel) else { return false };
    c.weight.is_hard()
        && c.constraints.is_empty()
        && lits.len() == 1
        && lits[0].positive
        && lits[0].atom.args.len() == 2
        && var(&lits[0].atom.args[0]).is_some()
        && lits[0].atom.args[0] == lits[0].atom.args[1]
}

fn pair(l: &Literal) -> Option<(&str, &str)> {
    match l.atom.args.as_slice() {
        [a, b] => Some((var(a)?, var(b)?)),
        _ => None,
    }
}

fn is_sym<T: Scalar>(c: &Clause<T>, rel: &str) -> bool {
    let Some(lits) = only_literals_of(c, rel) else { return false };
    if !c.weight.is_hard() || !c.constraints.is_empty() || lits.len() != 2 {
        return false;
    }
    let (neg, pos): (Vec<_>, Vec<_>) = lits.iter().partition(|l| !l.positive);
    if neg.len() != 1 || pos.len() != 1 {
        return false;
    }
    match (pair(neg[0]), pair(pos[0])) {
        (Some((a, b)), Some((c2, d))) => a != b && a == d && b == c2,
        _ => false,
    }
}

fn is_trn<T: Scalar>(c: &Clause<T>, rel: &str) -> bool {
    let Some(lits) = only_literals_of(c, rel) else { return false };
    if !c.weight.is_hard() || !c.constraints.is_empty() || lits.len() != 3 {
        return false;
    }
    let (neg, pos): (Vec<_>, Vec<_>) = lits.iter().partition(|l| !l.positive);
    if neg.len() != 2 || pos.len() != 1 {
        return false;
    }
    let (Some(n1), Some(n2), Some((a, c2))) = (pair(neg[0]), pair(neg[1]), pair(pos[0])) else {
        return false;
    };
    let ok = |(x, y): (&str, &str), (y2, z): (&str, &str)| y == y2 && x == a && z == c2 && x != y && y != z && x != z;
    ok(n1, n2) || ok(n2, n1)
}

/// `R(k.., b), R(k.., f) => b = f` up to argument position of the value.
fn key_pattern<T: Scalar>(c: &Clause<T>, rel: &str) -> Option<KeyInfo> {
    let lits = only_literals_of(c, rel)?;
    if !c.weight.is_hard() || lits.len() != 2 || lits.iter().any(|l| l.positive) || c.constraints.len() != 1 {
        return None;
    }
    let (a, b) = (&lits[0].atom.args, &lits[1].atom.args);
    if a.iter().chain(b).any(|t| var(t).is_none()) {
        return None;
    }
    let diff: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
    let [i] = diff[..] else { return None };
    let k = &c.constraints[0];
    let same_pair = (k.lhs == a[i] && k.rhs == b[i]) || (k.lhs == b[i] && k.rhs == a[i]);
    let value_elsewhere = (0..a.len()).any(|j| j != i && (a[j] == a[i] || a[j] == b[i]));
    if !k.equal || !same_pair || value_elsewhere {
        return None;
    }
    let key = (0..a.len()).filter(|&j| j != i).collect();
    Some(KeyInfo { key, value: i, rule: 0 })
}

/// Whether rule `r` uses `rel` recursively: twice in one clause, or in both
/// antecedent and consequent position across its clauses.
fn recursive_in<T: Scalar>(r: &Rule<T>, rel: &str) -> bool {
    let twice = r.clauses.iter().any(|c| c.literals.iter().filter(|l| l.atom.predicate == rel).count() > 1);
    let lits = r.clauses.iter().flat_map(|c| &c.literals).filter(|l| l.atom.predicate == rel);
    let (mut head, mut body) = (false, false);
    for l in lits {
        if l.in_head {
            head = true;
        } else {
            body = true;
        }
    }
    twice || (head && body)
}

fn recursion_pattern<T: Scalar>(r: &Rule<T>, rel: &str, program: &MlnProgram<T>) -> Option<Recursion> {
    if !matches!(r.formula, Formula::Implies { .. }) || r.clauses.len() != 1 {
        return None;
    }
    let c = &r.clauses[0];
    if !c.constraints.is_empty() || c.literals.len() != 3 {
        return None;
    }
    let rs: Vec<&Literal> = c.literals.iter().filter(|l| l.atom.predicate == rel).collect();
    let others: Vec<&Literal> = c.literals.iter().filter(|l| l.atom.predicate != rel).collect();
    if rs.len() != 2 || others.len() != 1 {
        return None;
    }
    let (body, head) = match (rs[0].in_head, rs[1].in_head) {
        (false, true) => (rs[0], rs[1]),
        (true, false) => (rs[1], rs[0]),
        _ => return None,
    };
    let t = others[0];
    let t_schema = program.schema(&t.atom.predicate)?;
    if t_schema.is_query() || t.in_head || t.positive {
        return None;
    }
    let (ba, ha) = (&body.atom.args, &head.atom.args);
    let diff: Vec<usize> = (0..ba.len()).filter(|&i| ba[i] != ha[i]).collect();
    let [pos] = diff[..] else { return None };
    let (y, z) = (var(&ba[pos])?, var(&ha[pos])?);
    let targs = &t.atom.args;
    let find = |v: &str| {
        let hits: Vec<usize> = (0..targs.len()).filter(|&i| var(&targs[i]) == Some(v)).collect();
        (hits.len() == 1).then(|| hits[0])
    };
    let (from, to) = (find(y)?, find(z)?);
    let mut context = Vec::new();
    for (i, ta) in targs.iter().enumerate() {
        if i == from || i == to {
            continue;
        }
        let v = var(ta)?;
        let j = (0..ba.len()).find(|&j| j != pos && var(&ba[j]) == Some(v))?;
        context.push((i, j));
    }
    Some(Recursion { rule: r.index, link: t.atom.predicate.clone(), position: pos, from, to, context })
}

/// The link relation must map each (context, y) to at most one z and its
/// graph must be acyclic, which is what makes the ground structure a forest.
fn link_is_chain_like<T: Scalar>(rec: &Recursion, program: &MlnProgram<T>) -> bool {
    let mut truth: HashMap<&[String], bool> = HashMap::new();
    for e in program.evidence.iter().filter(|e| e.predicate == rec.link) {
        truth.insert(&e.args, e.truth);
    }
    let node = |args: &[String], at: usize| {
        let mut k: Vec<String> = rec.context.iter().map(|&(i, _)| args[i].clone()).collect();
        k.push(args[at].clone());
        k
    };
    let mut succ: HashMap<Vec<String>, Vec<String>> = HashMap::new();
    for (args, _) in truth.iter().filter(|(_, &t)| t) {
        let (a, b) = (node(args, rec.from), node(args, rec.to));
        if a == b {
            return false;
        }
        if let Some(prev) = succ.insert(a, b.clone()) {
            if prev != b {
                return false;
            }
        }
    }
    // functional graph: follow successors with a visited set per walk
    let mut done: HashSet<Vec<String>> = HashSet::new();
    for start in succ.keys() {
        let mut seen = HashSet::new();
        let mut cur = start.clone();
        while let Some(next) = succ.get(&cur) {
            if done.contains(&cur) {
                break;
            }
            if !seen.insert(cur.clone()) {
                return false;
            }
            cur = next.clone();
        }
        done.extend(seen);
    }
    true
}

/// Properties of query relation `rel` by sufficient syntactic conditions.
pub fn analyze_relation<T: Scalar>(program: &MlnProgram<T>, rel: &str) -> RelationInfo {
    let mut props = BTreeSet::new();
    let mut key = None;
    let mut structural = Vec::new();
    for r in program.rules.iter().filter(|r| r.is_hard() && r.clauses.len() == 1) {
        let c = &r.clauses[0];
        let found = [(is_ref(c, rel), Property::Ref), (is_sym(c, rel), Property::Sym), (is_trn(c, rel), Property::Trn)];
        for (hit, p) in found {
            if hit {
                props.insert(p);
                structural.push(r.index);
            }
        }
        if key.is_none() {
            if let Some(mut k) = key_pattern(c, rel) {
                k.rule = r.index;
                props.insert(Property::Key);
                structural.push(r.index);
                key = Some(k);
            }
        }
    }

    let defining: Vec<usize> = program.rules.iter().filter(|r| r.defines(rel)).map(|r| r.index).collect();
    let key_rule = key.as_ref().map(|k| k.rule);
    let recursive: Vec<&Rule<T>> =
        defining.iter().map(|&i| &program.rules[i]).filter(|r| Some(r.index) != key_rule && recursive_in(r, rel)).collect();
    let mut recursions = Vec::new();
    if recursive.is_empty() {
        props.insert(Property::NoRec);
    } else {
        let matched: Option<Vec<Recursion>> = recursive.iter().map(|r| recursion_pattern(r, rel, program)).collect();
        if let Some(m) = matched {
            if m.iter().all(|rec| link_is_chain_like(rec, program)) {
                props.insert(Property::TrRec);
                recursions = m;
            }
        }
    }
    RelationInfo {
        name: rel.to_string(),
        properties: props,
        key,
        recursions,
        defining_rules: defining,
        structural_rules: structural,
    }
}

/// Property set of `rel`; see [`analyze_relation`].
pub fn detect_properties<T: Scalar>(program: &MlnProgram<T>, rel: &str) -> BTreeSet<Property> {
    analyze_relation(program, rel).properties
}
