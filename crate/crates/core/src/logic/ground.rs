use std::collections::{BTreeSet, HashMap, HashSet};

use super::{AtomId, Clause, Constraint, PredicateSchema, Sym, Symbols, Term, Weight};
use crate::error::{Error, Result};
use crate::parser::MlnProgram;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAtom {
    pub id: AtomId,
    /// Index into the database's predicate list.
    pub predicate: usize,
    pub args: Vec<Sym>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundLiteral {
    pub atom: AtomId,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundClause<T> {
    pub weight: Weight<T>,
    pub literals: Vec<GroundLiteral>,
    /// Index of the source rule, or `usize::MAX` for synthetic clauses.
    pub rule: usize,
}

impl<T: Scalar> GroundClause<T> {
    /// Builds a clause, merging repeated literals. Returns `None` for
    /// tautologies (`p v !p`).
    pub fn new(weight: Weight<T>, mut literals: Vec<GroundLiteral>, rule: usize) -> Option<Self> {
        literals.sort();
        literals.dedup();
        if literals.windows(2).any(|w| w[0].atom == w[1].atom) {
            return None;
        }
        Some(GroundClause { weight, literals, rule })
    }

    pub fn atoms(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.literals.iter().map(|l| l.atom)
    }
}

/// The optimization instance produced by grounding: query atoms, weighted
/// ground clauses over them, and the evidence they were simplified against.
#[derive(Debug, Clone)]
pub struct GroundDatabase<T> {
    pub predicates: Vec<PredicateSchema>,
    pub symbols: Symbols,
    atoms: Vec<GroundAtom>,
    index: HashMap<(usize, Vec<Sym>), AtomId>,
    pub clauses: Vec<GroundClause<T>>,
    evidence: HashSet<(usize, Vec<Sym>)>,
    /// Cost of instantiations whose truth value was decided by evidence
    /// alone. Identical for every world.
    pub fixed_cost: T,
}

impl<T: Scalar> GroundDatabase<T> {
    /// A propositional database over atoms `x0..x{n-1}` of a single query
    /// predicate `x`. Used for solver tests and synthetic instances.
    pub fn propositional(num_atoms: usize, clauses: Vec<GroundClause<T>>) -> Self {
        let mut symbols = Symbols::default();
        let mut atoms = Vec::with_capacity(num_atoms);
        let mut index = HashMap::new();
        for i in 0..num_atoms {
            let s = symbols.intern(&format!("{i:04}"));
            atoms.push(GroundAtom { id: i, predicate: 0, args: vec![s] });
            index.insert((0, vec![s]), i);
        }
        for c in &clauses {
            assert!(c.atoms().all(|a| a < num_atoms), "clause references unknown atom");
        }
        GroundDatabase {
            predicates: vec![PredicateSchema { name: "x".into(), domains: vec!["v".into()], kind: super::PredicateKind::Query }],
            symbols,
            atoms,
            index,
            clauses,
            evidence: HashSet::new(),
            fixed_cost: T::zero(),
        }
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[GroundAtom] {
        &self.atoms
    }

    pub fn atom(&self, id: AtomId) -> &GroundAtom {
        &self.atoms[id]
    }

    pub fn predicate_index(&self, name: &str) -> Option<usize> {
        self.predicates.iter().position(|p| p.name == name)
    }

    pub fn lookup(&self, predicate: &str, args: &[&str]) -> Option<AtomId> {
        let p = self.predicate_index(predicate)?;
        let syms: Option<Vec<Sym>> = args.iter().map(|a| self.symbols.get(a)).collect();
        self.index.get(&(p, syms?)).copied()
    }

    pub fn lookup_syms(&self, predicate: usize, args: &[Sym]) -> Option<AtomId> {
        self.index.get(&(predicate, args.to_vec())).copied()
    }

    pub fn is_evidence_true(&self, predicate: usize, args: &[Sym]) -> bool {
        self.evidence.contains(&(predicate, args.to_vec()))
    }

    pub fn atom_name(&self, id: AtomId) -> String {
        let a = &self.atoms[id];
        let args: Vec<&str> = a.args.iter().map(|&s| self.symbols.name(s)).collect();
        format!("{}({})", self.predicates[a.predicate].name, args.join(", "))
    }

    /// Copy of the database with every soft weight multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        for c in &mut out.clauses {
            c.weight = c.weight.scaled(factor);
        }
        out.fixed_cost = out.fixed_cost * factor;
        out
    }

    pub fn has_hard_clauses(&self) -> bool {
        self.clauses.iter().any(|c| c.weight.is_hard())
    }
}

/// Instantiates every rule of `program` over the active domains.
///
/// Instantiations already satisfied by evidence are dropped and evidence
/// literals with fixed truth are removed. Instantiations whose violation is
/// decided by evidence alone are accumulated into `fixed_cost`.
pub fn ground<T: Scalar>(program: &MlnProgram<T>) -> Result<GroundDatabase<T>> {
    let mut symbols = Symbols::default();
    let mut pred_index: HashMap<&str, usize> = HashMap::new();
    for (i, s) in program.schemas.iter().enumerate() {
        pred_index.insert(&s.name, i);
    }

    let mut domains: HashMap<&str, Vec<Sym>> = HashMap::new();
    for (name, dom) in &program.domains {
        let syms = dom.constants.iter().map(|c| symbols.intern(c)).collect();
        domains.insert(name.as_str(), syms);
    }

    let mut evidence: HashSet<(usize, Vec<Sym>)> = HashSet::new();
    let mut evidence_tuples: Vec<Vec<Vec<Sym>>> = vec![Vec::new(); program.schemas.len()];
    for ev in &program.evidence {
        let p = *pred_index.get(ev.predicate.as_str()).ok_or_else(|| Error::UnknownPredicate(ev.predicate.clone()))?;
        let args: Vec<Sym> = ev.args.iter().map(|a| symbols.intern(a)).collect();
        if ev.truth && evidence.insert((p, args.clone())) {
            evidence_tuples[p].push(args);
        } else if !ev.truth && evidence.remove(&(p, args.clone())) {
            evidence_tuples[p].retain(|t| *t != args);
        }
    }

    let mut g = Grounder {
        schemas: &program.schemas,
        pred_index,
        evidence: &evidence,
        evidence_tuples: &evidence_tuples,
        symbols: &mut symbols,
        raw_atoms: HashMap::new(),
        raw_list: Vec::new(),
        clauses: Vec::new(),
        fixed_cost: T::zero(),
    };

    for rule in &program.rules {
        for clause in &rule.clauses {
            g.ground_clause(rule.index, clause, &domains)?;
        }
    }

    let Grounder { raw_list, clauses, fixed_cost, .. } = g;

    // Deterministic ids: predicate declaration order, then constants in
    // lexicographic order.
    let mut order: Vec<usize> = (0..raw_list.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, aa) = &raw_list[a];
        let (pb, ab) = &raw_list[b];
        pa.cmp(pb).then_with(|| {
            let na = aa.iter().map(|&s| symbols.name(s));
            let nb = ab.iter().map(|&s| symbols.name(s));
            na.cmp(nb)
        })
    });
    let mut remap = vec![0; raw_list.len()];
    let mut atoms = Vec::with_capacity(raw_list.len());
    let mut index = HashMap::with_capacity(raw_list.len());
    for (new_id, &old) in order.iter().enumerate() {
        remap[old] = new_id;
        let (p, args) = raw_list[old].clone();
        index.insert((p, args.clone()), new_id);
        atoms.push(GroundAtom { id: new_id, predicate: p, args });
    }
    let clauses = clauses
        .into_iter()
        .filter_map(|c: GroundClause<T>| {
            let lits = c.literals.iter().map(|l| GroundLiteral { atom: remap[l.atom], positive: l.positive }).collect();
            GroundClause::new(c.weight, lits, c.rule)
        })
        .collect();

    Ok(GroundDatabase { predicates: program.schemas.clone(), symbols, atoms, index, clauses, evidence, fixed_cost })
}

struct Grounder<'a, T> {
    schemas: &'a [PredicateSchema],
    pred_index: HashMap<&'a str, usize>,
    evidence: &'a HashSet<(usize, Vec<Sym>)>,
    evidence_tuples: &'a [Vec<Vec<Sym>>],
    symbols: &'a mut Symbols,
    raw_atoms: HashMap<(usize, Vec<Sym>), AtomId>,
    raw_list: Vec<(usize, Vec<Sym>)>,
    clauses: Vec<GroundClause<T>>,
    fixed_cost: T,
}

/// A clause compiled against variable slots.
struct Compiled<T> {
    weight: Weight<T>,
    rule: usize,
    lits: Vec<CLit>,
    constraints: Vec<(Slot, Slot, bool)>,
    nvars: usize,
    var_domains: Vec<Vec<Sym>>,
}

#[derive(Clone, Copy)]
enum Slot {
    Var(usize),
    Const(Sym),
}

struct CLit {
    pred: usize,
    positive: bool,
    evidence: bool,
    args: Vec<Slot>,
}

fn resolve(slot: Slot, binding: &[Option<Sym>]) -> Option<Sym> {
    match slot {
        Slot::Var(v) => binding[v],
        Slot::Const(c) => Some(c),
    }
}

impl<T: Scalar> Grounder<'_, T> {
    fn ground_clause(&mut self, rule: usize, clause: &Clause<T>, domains: &HashMap<&str, Vec<Sym>>) -> Result<()> {
        let vars = clause.vars();
        let var_id = |name: &str| vars.iter().position(|v| v == name).expect("collected");
        let mut var_domains: Vec<Option<BTreeSet<Sym>>> = vec![None; vars.len()];

        let mut lits = Vec::new();
        for lit in &clause.literals {
            let pred = *self
                .pred_index
                .get(lit.atom.predicate.as_str())
                .ok_or_else(|| Error::UnknownPredicate(lit.atom.predicate.clone()))?;
            let schema = &self.schemas[pred];
            if schema.arity() != lit.atom.args.len() {
                return Err(Error::ArityMismatch {
                    name: schema.name.clone(),
                    expected: schema.arity(),
                    got: lit.atom.args.len(),
                });
            }
            let mut args = Vec::new();
            for (pos, t) in lit.atom.args.iter().enumerate() {
                match t {
                    Term::Var(v) => {
                        let id = var_id(v);
                        let dom: BTreeSet<Sym> =
                            domains.get(schema.domains[pos].as_str()).map(|d| d.iter().copied().collect()).unwrap_or_default();
                        var_domains[id] = Some(match var_domains[id].take() {
                            None => dom,
                            Some(prev) => prev.intersection(&dom).copied().collect(),
                        });
                        args.push(Slot::Var(id));
                    }
                    Term::Const(c) => args.push(Slot::Const(self.symbols.intern(c))),
                }
            }
            lits.push(CLit { pred, positive: lit.positive, evidence: !schema.is_query(), args });
        }
        let mut slot = |t: &Term| match t {
            Term::Var(v) => Slot::Var(var_id(v)),
            Term::Const(c) => Slot::Const(self.symbols.intern(c)),
        };
        let constraints =
            clause.constraints.iter().map(|Constraint { lhs, rhs, equal }| (slot(lhs), slot(rhs), *equal)).collect();

        let compiled = Compiled {
            weight: clause.weight,
            rule,
            lits,
            constraints,
            nvars: vars.len(),
            var_domains: var_domains.into_iter().map(|d| d.unwrap_or_default().into_iter().collect()).collect(),
        };
        let mut binding = vec![None; compiled.nvars];
        if compiled.weight.is_positive() {
            // Only instantiations where every body evidence atom holds can be
            // violated, so enumerate those by joining the evidence tuples.
            let generators: Vec<usize> =
                (0..compiled.lits.len()).filter(|&i| compiled.lits[i].evidence && !compiled.lits[i].positive).collect();
            self.enumerate_generators(&compiled, &generators, 0, &mut binding);
        } else if !compiled.weight.is_zero() {
            self.enumerate_vars(&compiled, 0, &mut binding);
        }
        Ok(())
    }

    fn enumerate_generators(&mut self, c: &Compiled<T>, gens: &[usize], k: usize, binding: &mut Vec<Option<Sym>>) {
        if k == gens.len() {
            self.enumerate_vars(c, 0, binding);
            return;
        }
        let lit = &c.lits[gens[k]];
        let tuples = &self.evidence_tuples[lit.pred];
        for tuple in tuples {
            let mut newly = Vec::new();
            let mut ok = true;
            for (slot, &val) in lit.args.iter().zip(tuple) {
                match *slot {
                    Slot::Const(s) if s != val => ok = false,
                    Slot::Const(_) => {}
                    Slot::Var(v) => match binding[v] {
                        Some(b) if b != val => ok = false,
                        Some(_) => {}
                        None => {
                            if c.var_domains[v].binary_search(&val).is_err() {
                                ok = false;
                            } else {
                                binding[v] = Some(val);
                                newly.push(v);
                            }
                        }
                    },
                }
                if !ok {
                    break;
                }
            }
            if ok && !self.satisfied_early(c, binding) {
                self.enumerate_generators(c, gens, k + 1, binding);
            }
            for v in newly {
                binding[v] = None;
            }
        }
    }

    fn enumerate_vars(&mut self, c: &Compiled<T>, v: usize, binding: &mut Vec<Option<Sym>>) {
        if v == c.nvars {
            self.emit(c, binding);
            return;
        }
        if binding[v].is_some() {
            self.enumerate_vars(c, v + 1, binding);
            return;
        }
        for i in 0..c.var_domains[v].len() {
            binding[v] = Some(c.var_domains[v][i]);
            if !c.weight.is_positive() || !self.satisfied_early(c, binding) {
                self.enumerate_vars(c, v + 1, binding);
            }
        }
        binding[v] = None;
    }

    /// True if some fully bound evidence literal or constraint already makes
    /// the clause true.
    fn satisfied_early(&self, c: &Compiled<T>, binding: &[Option<Sym>]) -> bool {
        for lit in c.lits.iter().filter(|l| l.evidence) {
            if let Some(args) = lit.args.iter().map(|&s| resolve(s, binding)).collect::<Option<Vec<_>>>() {
                if self.evidence.contains(&(lit.pred, args)) == lit.positive {
                    return true;
                }
            }
        }
        c.constraints.iter().any(|&(l, r, eq)| match (resolve(l, binding), resolve(r, binding)) {
            (Some(a), Some(b)) => (a == b) == eq,
            _ => false,
        })
    }

    fn emit(&mut self, c: &Compiled<T>, binding: &[Option<Sym>]) {
        let mut truth = c.constraints.iter().any(|&(l, r, eq)| {
            let a = resolve(l, binding).expect("bound");
            let b = resolve(r, binding).expect("bound");
            (a == b) == eq
        });
        let mut lits = Vec::new();
        if !truth {
            for lit in &c.lits {
                let args: Vec<Sym> = lit.args.iter().map(|&s| resolve(s, binding).expect("bound")).collect();
                if lit.evidence {
                    if self.evidence.contains(&(lit.pred, args)) == lit.positive {
                        truth = true;
                        break;
                    }
                } else {
                    let id = self.atom_id(lit.pred, args);
                    lits.push(super::GroundLiteral { atom: id, positive: lit.positive });
                }
            }
        }
        let positive = c.weight.is_positive();
        if truth {
            if !positive {
                self.fixed_cost = self.fixed_cost + c.weight.magnitude();
            }
            return;
        }
        if lits.is_empty() {
            if positive {
                self.fixed_cost = self.fixed_cost + c.weight.magnitude();
            }
            return;
        }
        match GroundClause::new(c.weight, lits, c.rule) {
            Some(gc) => self.clauses.push(gc),
            None => {
                // Tautology: always true.
                if !positive {
                    self.fixed_cost = self.fixed_cost + c.weight.magnitude();
                }
            }
        }
    }

    fn atom_id(&mut self, pred: usize, args: Vec<Sym>) -> AtomId {
        if let Some(&id) = self.raw_atoms.get(&(pred, args.clone())) {
            return id;
        }
        let id = self.raw_list.len();
        self.raw_list.push((pred, args.clone()));
        self.raw_atoms.insert((pred, args), id);
        id
    }
}
