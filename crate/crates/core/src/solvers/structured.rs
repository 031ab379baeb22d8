//! Mapping task components onto the classification, chain and clustering
//! solvers.
//!
//! Atoms of relations the task owns form groups: a single atom, or every
//! atom sharing a key when hard rules allow at most one of them to be true.
//! A group's states are "all false" followed by "only atom j true". Other
//! atoms in the component are conditioned on: all their assignments are
//! enumerated when there are few of them, otherwise owned and other atoms are
//! optimized in alternation.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::chain::{solve_chain_map, solve_chain_marginal, ChainModel};
use super::classification::table_argmin;
use super::coref::{solve_coref, CorefGraph};
use super::subproblem::{clause_cost, UnionFind};
use super::{mix_seed, solve_generic, Mode, SolverConfig, SolverResult, SubProblem, TaskSpec};
use crate::error::{Error, Result};
use crate::logic::{GroundDatabase, Sym};
use crate::scalar::{log_sum_exp, Scalar};

struct Labeling {
    groups: Vec<Vec<usize>>,
    foreign: Vec<usize>,
    unary: Vec<Vec<usize>>,
    pairs: BTreeMap<(usize, usize), Vec<usize>>,
    foreign_clauses: Vec<usize>,
    paths: Vec<Vec<usize>>,
}

fn analyze<T: Scalar>(db: &GroundDatabase<T>, spec: &TaskSpec, sub: &SubProblem<T>) -> Option<Labeling> {
    let n = sub.len();
    let mut keyed: BTreeMap<(usize, Vec<Sym>), Vec<usize>> = BTreeMap::new();
    let mut foreign = Vec::new();
    for i in 0..n {
        let atom = db.atom(sub.atoms[i]);
        match spec.owned.iter().find(|o| o.predicate == atom.predicate && !o.equivalence) {
            Some(o) => {
                let k = match &o.key {
                    Some(key) => key.iter().map(|&p| atom.args[p]).collect(),
                    None => atom.args.clone(),
                };
                keyed.entry((atom.predicate, k)).or_default().push(i);
            }
            None => foreign.push(i),
        }
    }
    if keyed.is_empty() {
        return None;
    }
    let exclusive: HashSet<(usize, usize)> = sub
        .clauses
        .iter()
        .filter(|c| c.weight.is_hard() && c.literals.len() == 2 && c.literals.iter().all(|l| !l.positive))
        .map(|c| (c.literals[0].atom, c.literals[1].atom))
        .collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (_, atoms) in keyed {
        let one_hot = atoms.iter().enumerate().all(|(x, &a)| atoms[x + 1..].iter().all(|&b| exclusive.contains(&(a, b))));
        if one_hot {
            groups.push(atoms);
        } else {
            groups.extend(atoms.into_iter().map(|a| vec![a]));
        }
    }
    groups.sort_by_key(|g| g[0]);
    let mut group_of = vec![usize::MAX; n];
    for (g, atoms) in groups.iter().enumerate() {
        for &a in atoms {
            group_of[a] = g;
        }
    }
    let mut unary = vec![Vec::new(); groups.len()];
    let mut pairs: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut foreign_clauses = Vec::new();
    for (ci, c) in sub.clauses.iter().enumerate() {
        let gs: BTreeSet<usize> = c.literals.iter().map(|l| group_of[l.atom]).filter(|&g| g != usize::MAX).collect();
        let gs: Vec<usize> = gs.into_iter().collect();
        match gs[..] {
            [] => foreign_clauses.push(ci),
            [g] => unary[g].push(ci),
            [a, b] => pairs.entry((a, b)).or_default().push(ci),
            _ => return None,
        }
    }
    let mut degree = vec![0; groups.len()];
    let mut uf = UnionFind::new(groups.len());
    let mut adj = vec![Vec::new(); groups.len()];
    for &(a, b) in pairs.keys() {
        degree[a] += 1;
        degree[b] += 1;
        if degree[a] > 2 || degree[b] > 2 || !uf.union(a, b) {
            return None;
        }
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; groups.len()];
    let mut paths = Vec::new();
    for start in 0..groups.len() {
        if seen[start] || degree[start] > 1 {
            continue;
        }
        let mut path = vec![start];
        seen[start] = true;
        let mut cur = start;
        while let Some(&next) = adj[cur].iter().find(|&&x| !seen[x]) {
            seen[next] = true;
            path.push(next);
            cur = next;
        }
        paths.push(path);
    }
    Some(Labeling { groups, foreign, unary, pairs, foreign_clauses, paths })
}

impl Labeling {
    fn set_state(&self, world: &mut [bool], g: usize, s: usize) {
        for (j, &a) in self.groups[g].iter().enumerate() {
            world[a] = s == j + 1;
        }
    }

    fn clauses_cost<T: Scalar>(sub: &SubProblem<T>, clauses: &[usize], world: &[bool]) -> T {
        clauses.iter().map(|&c| clause_cost(&sub.clauses[c], world)).fold(T::zero(), |a, b| a + b)
    }

    /// Chain model for `path` with the foreign atoms already set in `world`.
    fn model<T: Scalar>(&self, sub: &SubProblem<T>, path: &[usize], world: &mut [bool]) -> ChainModel<T> {
        let unary = path
            .iter()
            .map(|&g| {
                (0..=self.groups[g].len())
                    .map(|s| {
                        self.set_state(world, g, s);
                        let prior = if s == 0 { T::zero() } else { sub.priors[self.groups[g][s - 1]] };
                        prior + Self::clauses_cost(sub, &self.unary[g], world)
                    })
                    .collect()
            })
            .collect();
        let pair = path
            .windows(2)
            .map(|w| {
                let (g, h) = (w[0], w[1]);
                let clauses = &self.pairs[&(g.min(h), g.max(h))];
                (0..=self.groups[g].len())
                    .map(|s| {
                        (0..=self.groups[h].len())
                            .map(|t| {
                                self.set_state(world, g, s);
                                self.set_state(world, h, t);
                                Self::clauses_cost(sub, clauses, world)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        ChainModel { unary, pair }
    }

    fn foreign_cost<T: Scalar>(&self, sub: &SubProblem<T>, world: &[bool]) -> T {
        let prior = self.foreign.iter().filter(|&&a| world[a]).map(|&a| sub.priors[a]).fold(T::zero(), |a, b| a + b);
        prior + Self::clauses_cost(sub, &self.foreign_clauses, world)
    }

    /// Best owned labeling given the foreign atoms in `world`; writes it into
    /// `world` and returns the owned part of the cost, or `None` if every
    /// labeling violates a hard clause.
    fn owned_map<T: Scalar>(&self, sub: &SubProblem<T>, world: &mut [bool]) -> Result<Option<T>> {
        let mut total = T::zero();
        for path in &self.paths {
            let m = self.model(sub, path, world);
            let labels = if path.len() == 1 {
                match table_argmin(&m.unary[0], self.groups[path[0]].len() == 1) {
                    Ok(s) => vec![s],
                    Err(Error::Infeasible(_)) => return Ok(None),
                    Err(e) => return Err(e),
                }
            } else {
                match solve_chain_map(&m) {
                    Ok((l, _)) => l,
                    Err(Error::Infeasible(_)) => return Ok(None),
                    Err(e) => return Err(e),
                }
            };
            total = total + m.cost(&labels);
            for (&g, &s) in path.iter().zip(&labels) {
                self.set_state(world, g, s);
            }
        }
        Ok(Some(total))
    }

    /// Owned marginals given the foreign atoms in `world`, and the owned
    /// part of `log Z`.
    fn owned_marginals<T: Scalar>(&self, sub: &SubProblem<T>, world: &mut [bool], out: &mut [T]) -> Result<Option<T>> {
        let mut log_z = T::zero();
        for path in &self.paths {
            let m = self.model(sub, path, world);
            let (marg, z) = match solve_chain_marginal(&m) {
                Ok(r) => r,
                Err(Error::Infeasible(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            log_z = log_z + z;
            for (&g, probs) in path.iter().zip(&marg) {
                for (j, &a) in self.groups[g].iter().enumerate() {
                    out[a] = probs[j + 1];
                }
            }
        }
        Ok(Some(log_z))
    }
}

fn set_mask(world: &mut [bool], atoms: &[usize], mask: u64) {
    let k = atoms.len();
    for (j, &a) in atoms.iter().enumerate() {
        world[a] = mask >> (k - 1 - j) & 1 == 1;
    }
}

/// Exact classification / chain solving of one component with its foreign
/// atoms enumerated. `None` when the component does not have that shape.
pub(crate) fn solve_labeling<T: Scalar>(
    db: &GroundDatabase<T>,
    spec: &TaskSpec,
    sub: &SubProblem<T>,
    mode: Mode,
    config: &SolverConfig,
    seed: u64,
) -> Result<Option<SolverResult<T>>> {
    let Some(lab) = analyze(db, spec, sub) else { return Ok(None) };
    let n = sub.len();
    if lab.foreign.len() > config.condition_limit {
        if n <= config.exact_limit || mode == Mode::Marginal {
            return Ok(None);
        }
        return alternate_labeling(&lab, sub, config, seed);
    }
    let mut world = vec![false; n];
    match mode {
        Mode::Map => {
            let mut best: Option<(Vec<bool>, T)> = None;
            for mask in 0..(1u64 << lab.foreign.len()) {
                set_mask(&mut world, &lab.foreign, mask);
                let fc = lab.foreign_cost(sub, &world);
                if fc.is_infinite() {
                    continue;
                }
                if let Some(oc) = lab.owned_map(sub, &mut world)? {
                    let c = fc + oc;
                    if best.as_ref().is_none_or(|b| c < b.1) {
                        best = Some((world.clone(), c));
                    }
                }
            }
            let (w, _) = best.ok_or_else(|| Error::Infeasible("every assignment violates a hard clause".into()))?;
            let cost = sub.cost(&w);
            Ok(Some(SolverResult::from_world(&w, cost, true)))
        }
        Mode::Marginal => {
            let mut logs: Vec<T> = Vec::new();
            let mut margs: Vec<Vec<T>> = Vec::new();
            for mask in 0..(1u64 << lab.foreign.len()) {
                set_mask(&mut world, &lab.foreign, mask);
                let fc = lab.foreign_cost(sub, &world);
                if fc.is_infinite() {
                    continue;
                }
                let mut m = vec![T::zero(); n];
                for &a in &lab.foreign {
                    m[a] = if world[a] { T::one() } else { T::zero() };
                }
                if let Some(z) = lab.owned_marginals(sub, &mut world, &mut m)? {
                    logs.push(z - fc);
                    margs.push(m);
                }
            }
            let total = log_sum_exp(&logs);
            if total == T::neg_infinity() {
                return Err(Error::Infeasible("every assignment violates a hard clause".into()));
            }
            let mut values = vec![T::zero(); n];
            for (lw, m) in logs.iter().zip(&margs) {
                let p = (*lw - total).exp();
                for (v, &x) in values.iter_mut().zip(m) {
                    *v = *v + p * x;
                }
            }
            Ok(Some(SolverResult { values, cost: None, exact: true }))
        }
    }
}

/// Block coordinate descent: owned atoms exactly given the rest, the rest by
/// the generic solver given the owned atoms.
fn alternate_labeling<T: Scalar>(
    lab: &Labeling,
    sub: &SubProblem<T>,
    config: &SolverConfig,
    seed: u64,
) -> Result<Option<SolverResult<T>>> {
    let n = sub.len();
    let mut world = vec![false; n];
    let mut best: Option<(Vec<bool>, T)> = None;
    for round in 0..20u64 {
        if lab.owned_map(sub, &mut world)?.is_none() {
            break;
        }
        let mut fixed: Vec<Option<bool>> = vec![None; n];
        for g in &lab.groups {
            for &a in g {
                fixed[a] = Some(world[a]);
            }
        }
        let (rest, kept) = sub.condition(&fixed);
        let r = match solve_generic(&rest, Mode::Map, config, mix_seed(seed, round)) {
            Ok(r) => r,
            Err(Error::Infeasible(_)) => break,
            Err(e) => return Err(e),
        };
        for (j, &i) in kept.iter().enumerate() {
            world[i] = r.values[j] > T::of(0.5);
        }
        let c = sub.cost(&world);
        if best.as_ref().is_some_and(|b| c >= b.1) {
            break;
        }
        best = Some((world.clone(), c));
    }
    Ok(best.filter(|b| b.1.is_finite()).map(|(w, c)| SolverResult::from_world(&w, c, false)))
}

struct Clustering {
    /// Local atom, node pair.
    pairs: Vec<(usize, usize, usize)>,
    nodes: usize,
    foreign: Vec<usize>,
    /// Non-structural clauses mentioning each pair atom.
    on_pair: BTreeMap<usize, Vec<usize>>,
}

fn analyze_clustering<T: Scalar>(db: &GroundDatabase<T>, spec: &TaskSpec, sub: &SubProblem<T>) -> Option<Clustering> {
    let rel = spec.owned.iter().find(|o| o.equivalence)?;
    let mut syms: BTreeSet<Sym> = BTreeSet::new();
    let mut raw = Vec::new();
    let mut foreign = Vec::new();
    let mut is_pair = vec![false; sub.len()];
    for (i, &g) in sub.atoms.iter().enumerate() {
        let a = db.atom(g);
        if a.predicate == rel.predicate {
            syms.extend(a.args.iter().copied());
            raw.push((i, a.args[0], a.args[1]));
            is_pair[i] = true;
        } else {
            foreign.push(i);
        }
    }
    let node_of: BTreeMap<Sym, usize> = syms.iter().enumerate().map(|(k, &s)| (s, k)).collect();
    let pairs = raw.into_iter().map(|(i, a, b)| (i, node_of[&a], node_of[&b])).collect();
    let mut on_pair: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (ci, c) in sub.clauses.iter().enumerate() {
        if rel.structural.contains(&c.rule) {
            continue;
        }
        let ps: Vec<usize> = c.literals.iter().map(|l| l.atom).filter(|&a| is_pair[a]).collect();
        match ps[..] {
            [] => {}
            [a] => on_pair.entry(a).or_default().push(ci),
            _ => return None,
        }
    }
    Some(Clustering { pairs, nodes: syms.len(), foreign, on_pair })
}

impl Clustering {
    /// Builds the weighted graph given the foreign atoms in `world`, keeps
    /// the cheapest of `restarts` pivot clusterings and writes the pair atoms into `world`. `None` if the hard clauses
    /// cannot be met.
    fn cluster<T: Scalar>(&self, sub: &SubProblem<T>, world: &mut [bool], restarts: usize, seed: u64) -> Result<Option<()>> {
        let mut graph = CorefGraph::new(self.nodes);
        for &(a, x, y) in &self.pairs {
            let clauses = self.on_pair.get(&a).map(Vec::as_slice).unwrap_or(&[]);
            let mut cost_at = |v: bool| {
                world[a] = v;
                let p = if v { sub.priors[a] } else { T::zero() };
                clauses.iter().fold(p, |acc, &c| acc + clause_cost(&sub.clauses[c], world))
            };
            let (ct, cf) = (cost_at(true), cost_at(false));
            if x == y {
                if ct.is_infinite() {
                    return Ok(None);
                }
                continue;
            }
            let w = match (ct.is_infinite(), cf.is_infinite()) {
                (true, true) => return Ok(None),
                (false, true) => T::infinity(),
                (true, false) => T::neg_infinity(),
                (false, false) => cf - ct,
            };
            if w != T::zero() {
                match graph.add_weight(x, y, w) {
                    Ok(()) => {}
                    Err(Error::Infeasible(_)) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
        }
        graph.index();
        let mut labels: Option<(Vec<usize>, T)> = None;
        for r in 0..restarts.max(1) {
            match solve_coref(&graph, &graph, mix_seed(seed, r as u64)) {
                Ok((l, c)) => {
                    if labels.as_ref().is_none_or(|b| c < b.1) {
                        labels = Some((l, c));
                    }
                }
                Err(Error::Infeasible(_)) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        let Some((labels, _)) = labels else { return Ok(None) };
        for &(a, x, y) in &self.pairs {
            world[a] = labels[x] == labels[y];
        }
        Ok(Some(()))
    }
}

/// Correlation clustering of a task whose owned relation is an equivalence
/// relation. The result is a MAP world. In marginal mode the relation's atoms
/// take their indicator values and the other atoms their marginals given the
/// partition. `None` when some rule links two atoms of the relation.
pub(crate) fn solve_clustering<T: Scalar>(
    db: &GroundDatabase<T>,
    spec: &TaskSpec,
    sub: &SubProblem<T>,
    mode: Mode,
    config: &SolverConfig,
    seed: u64,
) -> Result<Option<SolverResult<T>>> {
    let Some(cl) = analyze_clustering(db, spec, sub) else { return Ok(None) };
    let n = sub.len();
    let mut world = vec![false; n];
    let mut best: Option<(Vec<bool>, T)> = None;
    if cl.foreign.len() <= config.condition_limit {
        for mask in 0..(1u64 << cl.foreign.len()) {
            set_mask(&mut world, &cl.foreign, mask);
            if cl.cluster(sub, &mut world, config.coref_restarts, mix_seed(seed, mask))?.is_none() {
                continue;
            }
            let c = sub.cost(&world);
            if c.is_finite() && best.as_ref().is_none_or(|b| c < b.1) {
                best = Some((world.clone(), c));
            }
        }
    } else {
        let pair_atoms: Vec<usize> = cl.pairs.iter().map(|p| p.0).collect();
        for round in 0..20u64 {
            if cl.cluster(sub, &mut world, config.coref_restarts, mix_seed(seed, round))?.is_none() {
                break;
            }
            let mut fixed: Vec<Option<bool>> = vec![None; n];
            for &a in &pair_atoms {
                fixed[a] = Some(world[a]);
            }
            let (rest, kept) = sub.condition(&fixed);
            let r = match solve_generic(&rest, Mode::Map, config, mix_seed(seed, round + 1000)) {
                Ok(r) => r,
                Err(Error::Infeasible(_)) => break,
                Err(e) => return Err(e),
            };
            for (j, &i) in kept.iter().enumerate() {
                world[i] = r.values[j] > T::of(0.5);
            }
            let c = sub.cost(&world);
            if best.as_ref().is_some_and(|b| c >= b.1) {
                break;
            }
            best = Some((world.clone(), c));
        }
    }
    let (w, c) = match best {
        Some((w, c)) if c.is_finite() => (w, c),
        _ => return Err(Error::Infeasible("no clustering satisfies the hard clauses".into())),
    };
    if mode == Mode::Map || cl.foreign.is_empty() {
        return Ok(Some(SolverResult::from_world(&w, c, false)));
    }
    // other atoms get their marginals given the partition
    let mut fixed: Vec<Option<bool>> = vec![None; n];
    for p in &cl.pairs {
        fixed[p.0] = Some(w[p.0]);
    }
    let (rest, kept) = sub.condition(&fixed);
    let mut values: Vec<T> = w.iter().map(|&b| if b { T::one() } else { T::zero() }).collect();
    for (k, (comp, map)) in rest.components().into_iter().enumerate() {
        let r = solve_generic(&comp, Mode::Marginal, config, mix_seed(seed, 2000 + k as u64))?;
        for (j, &i) in map.iter().enumerate() {
            values[kept[i]] = r.values[j];
        }
    }
    Ok(Some(SolverResult { values, cost: None, exact: false }))
}
