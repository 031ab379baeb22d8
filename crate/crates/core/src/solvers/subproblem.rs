use std::collections::HashMap;

use crate::logic::{clause_violated, AtomId, GroundClause, GroundDatabase, GroundLiteral, Weight};
use crate::scalar::Scalar;

/// A task's view of the ground program: a subset of atoms, the clauses over
/// them (re-indexed to local positions), a linear prior per atom and a
/// constant.
///
/// The cost of a local world `x` is
/// `offset + sum(prior[i] * x[i]) + sum(|w| over violated clauses)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubProblem<T> {
    /// Global atom ids, ascending. Local index `i` refers to `atoms[i]`.
    pub atoms: Vec<AtomId>,
    pub clauses: Vec<GroundClause<T>>,
    pub priors: Vec<T>,
    pub offset: T,
}

pub(crate) fn clause_cost<T: Scalar>(c: &GroundClause<T>, world: &[bool]) -> T {
    if clause_violated(c, world) {
        c.weight.magnitude()
    } else {
        T::zero()
    }
}

impl<T: Scalar> SubProblem<T> {
    /// Collects `clauses` (given by global atom ids) over the atoms they
    /// mention, multiplying soft weights by `scale`.
    pub fn from_clauses<'a>(clauses: impl IntoIterator<Item = &'a GroundClause<T>>, scale: T) -> Self {
        let clauses: Vec<&GroundClause<T>> = clauses.into_iter().collect();
        let mut atoms: Vec<AtomId> = clauses.iter().flat_map(|c| c.atoms()).collect();
        atoms.sort_unstable();
        atoms.dedup();
        let local: HashMap<AtomId, usize> = atoms.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        let clauses = clauses
            .into_iter()
            .map(|c| GroundClause {
                weight: c.weight.scaled(scale),
                literals: c.literals.iter().map(|l| GroundLiteral { atom: local[&l.atom], positive: l.positive }).collect(),
                rule: c.rule,
            })
            .collect();
        let n = atoms.len();
        SubProblem { atoms, clauses, priors: vec![T::zero(); n], offset: T::zero() }
    }

    /// The whole ground database as one problem, local ids equal to global.
    pub fn from_database(db: &GroundDatabase<T>) -> Self {
        let n = db.num_atoms();
        SubProblem { atoms: (0..n).collect(), clauses: db.clauses.clone(), priors: vec![T::zero(); n], offset: db.fixed_cost }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn local(&self, atom: AtomId) -> Option<usize> {
        self.atoms.binary_search(&atom).ok()
    }

    pub fn cost(&self, world: &[bool]) -> T {
        let mut c = self.offset;
        for (i, &x) in world.iter().enumerate() {
            if x {
                c = c + self.priors[i];
            }
        }
        for cl in &self.clauses {
            c = c + clause_cost(cl, world);
        }
        c
    }

    pub fn has_hard_clauses(&self) -> bool {
        self.clauses.iter().any(|c| c.weight.is_hard())
    }

    /// Same problem with each prior turned into a unit clause of weight
    /// `-prior`, with the offset adjusted so that costs are unchanged.
    pub fn with_singletons(&self) -> Self {
        let mut out = self.clone();
        for (i, &p) in self.priors.iter().enumerate() {
            if p != T::zero() {
                let lit = vec![GroundLiteral { atom: i, positive: true }];
                out.clauses.push(GroundClause { weight: Weight::Soft(-p), literals: lit, rule: usize::MAX });
                out.priors[i] = T::zero();
                if p < T::zero() {
                    out.offset = out.offset + p;
                }
            }
        }
        out
    }

    /// Propositional database with the same cost function, priors encoded
    /// as unit clauses. Atom `i` of the result is local atom `i`.
    pub fn to_database(&self) -> GroundDatabase<T> {
        let s = self.with_singletons();
        let mut db = GroundDatabase::propositional(s.len(), s.clauses);
        db.fixed_cost = s.offset;
        db
    }

    /// Fixes the atoms with `Some` value and simplifies. Returns the reduced
    /// problem over the remaining atoms and, for each of them, its local index
    /// in `self`.
    pub fn condition(&self, fixed: &[Option<bool>]) -> (Self, Vec<usize>) {
        let kept: Vec<usize> = (0..self.len()).filter(|&i| fixed[i].is_none()).collect();
        let mut remap = vec![usize::MAX; self.len()];
        for (j, &i) in kept.iter().enumerate() {
            remap[i] = j;
        }
        let mut offset = self.offset;
        for (i, f) in fixed.iter().enumerate() {
            if *f == Some(true) {
                offset = offset + self.priors[i];
            }
        }
        let mut clauses = Vec::with_capacity(self.clauses.len());
        for c in &self.clauses {
            let mut satisfied = false;
            let mut lits = Vec::with_capacity(c.literals.len());
            for l in &c.literals {
                match fixed[l.atom] {
                    Some(v) if v == l.positive => satisfied = true,
                    Some(_) => {}
                    None => lits.push(GroundLiteral { atom: remap[l.atom], positive: l.positive }),
                }
            }
            if satisfied || lits.is_empty() {
                if satisfied != c.weight.is_positive() {
                    offset = offset + c.weight.magnitude();
                }
            } else {
                clauses.push(GroundClause { weight: c.weight, literals: lits, rule: c.rule });
            }
        }
        let sub = SubProblem {
            atoms: kept.iter().map(|&i| self.atoms[i]).collect(),
            clauses,
            priors: kept.iter().map(|&i| self.priors[i]).collect(),
            offset,
        };
        (sub, kept)
    }

    /// Connected components of the atom/clause incidence graph. Each entry
    /// holds the component and its atoms' local indices in `self`. The offset
    /// goes to the first component. Components are ordered by smallest atom.
    pub fn components(&self) -> Vec<(Self, Vec<usize>)> {
        let n = self.len();
        let mut uf = UnionFind::new(n);
        for c in &self.clauses {
            for w in c.literals.windows(2) {
                uf.union(w[0].atom, w[1].atom);
            }
        }
        let mut root_to_comp: HashMap<usize, usize> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let r = uf.find(i);
            let k = *root_to_comp.entry(r).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            });
            members[k].push(i);
        }
        let mut comp_of = vec![0; n];
        let mut pos = vec![0; n];
        for (k, m) in members.iter().enumerate() {
            for (j, &i) in m.iter().enumerate() {
                comp_of[i] = k;
                pos[i] = j;
            }
        }
        let mut out: Vec<(Self, Vec<usize>)> = members
            .iter()
            .map(|m| {
                let sub = SubProblem {
                    atoms: m.iter().map(|&i| self.atoms[i]).collect(),
                    clauses: Vec::new(),
                    priors: m.iter().map(|&i| self.priors[i]).collect(),
                    offset: T::zero(),
                };
                (sub, m.clone())
            })
            .collect();
        let mut constant = self.offset;
        for c in &self.clauses {
            match c.literals.first() {
                Some(l) => {
                    let k = comp_of[l.atom];
                    let lits = c.literals.iter().map(|l| GroundLiteral { atom: pos[l.atom], positive: l.positive }).collect();
                    out[k].0.clauses.push(GroundClause { weight: c.weight, literals: lits, rule: c.rule });
                }
                None => {
                    if c.weight.is_positive() {
                        constant = constant + c.weight.magnitude();
                    }
                }
            }
        }
        match out.first_mut() {
            Some(first) => first.0.offset = constant,
            None => {
                if constant != T::zero() {
                    out.push((SubProblem { atoms: vec![], clauses: vec![], priors: vec![], offset: constant }, vec![]));
                }
            }
        }
        out
    }

    /// For each local atom, the clauses it occurs in.
    pub(crate) fn occurrences(&self) -> Vec<Vec<usize>> {
        let mut occ = vec![Vec::new(); self.len()];
        for (ci, c) in self.clauses.iter().enumerate() {
            for l in &c.literals {
                occ[l.atom].push(ci);
            }
        }
        occ
    }
}

#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::brute_force_map;

    fn lit(atom: usize, positive: bool) -> GroundLiteral {
        GroundLiteral { atom, positive }
    }

    fn clause(w: f64, lits: &[(usize, bool)]) -> GroundClause<f64> {
        GroundClause::new(Weight::Soft(w), lits.iter().map(|&(a, p)| lit(a, p)).collect(), 0).unwrap()
    }

    fn sample() -> SubProblem<f64> {
        let cs = [clause(1.0, &[(3, true), (7, false)]), clause(-2.0, &[(7, true)]), clause(0.5, &[(9, true)])];
        let mut s = SubProblem::from_clauses(&cs, 1.0);
        s.priors = vec![0.3, -0.2, 0.0];
        s
    }

    #[test]
    fn local_indexing() {
        let s = sample();
        assert_eq!(s.atoms, vec![3, 7, 9]);
    }

    #[test]
    fn components_split_and_costs_add() {
        let s = sample();
        let comps = s.components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].1, vec![0, 1]);
        assert_eq!(comps[1].1, vec![2]);
        for mask in 0..8u32 {
            let w: Vec<bool> = (0..3).map(|i| mask >> i & 1 == 1).collect();
            let split: f64 = comps.iter().map(|(c, m)| c.cost(&m.iter().map(|&i| w[i]).collect::<Vec<_>>())).sum();
            assert!((split - s.cost(&w)).abs() < 1e-12);
        }
    }

    #[test]
    fn conditioning_preserves_cost() {
        let s = sample();
        let fixed = [None, Some(true), None];
        let (r, kept) = s.condition(&fixed);
        assert_eq!(kept, vec![0, 2]);
        for mask in 0..4u32 {
            let w = [mask & 1 == 1, true, mask & 2 == 2];
            assert!((r.cost(&[w[0], w[2]]) - s.cost(&w)).abs() < 1e-12);
        }
    }

    #[test]
    fn singleton_encoding_shifts_by_constant() {
        let s = sample();
        let db = s.to_database();
        let shift = s.cost(&[false; 3]) - crate::logic::world_cost(&db, &[false; 3]);
        for mask in 0..8u32 {
            let w: Vec<bool> = (0..3).map(|i| mask >> i & 1 == 1).collect();
            assert!((s.cost(&w) - crate::logic::world_cost(&db, &w) - shift).abs() < 1e-12);
        }
        assert!(brute_force_map(&db).is_ok());
    }
}
