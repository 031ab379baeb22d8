use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::subproblem::UnionFind;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Bound-first access to the positive adjacency of a coreference graph.
pub trait NeighborOracle {
    /// Appends the nodes positively linked to `node`.
    fn neighbors(&self, node: usize, out: &mut Vec<usize>);
}

/// Symmetric pairwise weights over nodes `0..nodes`. Positive weights favour
/// putting two nodes in one cluster; `+inf`/`-inf` are must-link and
/// cannot-link. Missing pairs weigh 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorefGraph<T> {
    pub nodes: usize,
    weights: BTreeMap<(usize, usize), T>,
    adjacency: Vec<Vec<usize>>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl<T: Scalar> CorefGraph<T> {
    pub fn new(nodes: usize) -> Self {
        CorefGraph { nodes, weights: BTreeMap::new(), adjacency: vec![Vec::new(); nodes] }
    }

    /// Adds `w` to the weight of `{a, b}`. Adding opposite infinities is an
    /// error: the pair is both must-link and cannot-link.
    pub fn add_weight(&mut self, a: usize, b: usize, w: T) -> Result<()> {
        if a == b {
            return Err(Error::Model("coreference graph has no self edges".into()));
        }
        let e = self.weights.entry(key(a, b)).or_insert(T::zero());
        let sum = *e + w;
        if sum.is_nan() {
            return Err(Error::Infeasible(format!("nodes {a} and {b} are both must-link and cannot-link")));
        }
        *e = sum;
        Ok(())
    }

    pub fn weight(&self, a: usize, b: usize) -> T {
        self.weights.get(&key(a, b)).copied().unwrap_or(T::zero())
    }

    pub fn explicit_weight(&self, a: usize, b: usize) -> Option<T> {
        self.weights.get(&key(a, b)).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), T)> + '_ {
        self.weights.iter().map(|(&k, &w)| (k, w))
    }

    /// Rebuilds the positive adjacency lists used by the oracle impl.
    pub fn index(&mut self) {
        self.adjacency = vec![Vec::new(); self.nodes];
        for (&(a, b), &w) in &self.weights {
            if w > T::zero() {
                self.adjacency[a].push(b);
                self.adjacency[b].push(a);
            }
        }
    }

    /// Penalty of separating positive pairs plus penalty of joining negative
    /// pairs, for cluster labels per node.
    pub fn disagreement_cost(&self, labels: &[usize]) -> T {
        let mut c = T::zero();
        for (&(a, b), &w) in &self.weights {
            let together = labels[a] == labels[b];
            if together && w < T::zero() {
                c = c - w;
            } else if !together && w > T::zero() {
                c = c + w;
            }
        }
        c
    }
}

impl<T: Scalar> NeighborOracle for CorefGraph<T> {
    fn neighbors(&self, node: usize, out: &mut Vec<usize>) {
        out.extend_from_slice(&self.adjacency[node]);
    }
}

/// Correlation clustering by randomized pivoting.
///
/// Must-link pairs are contracted first. Then an unclustered super-node is
/// drawn uniformly at random and joined by every unclustered super-node it is
/// positively linked to, skipping any that has a cannot-link into the growing
/// cluster. Pairs reported by `oracle` without an explicit weight count as
/// weight 1. Returns cluster labels (smallest member per cluster) and the
/// disagreement cost over explicit weights.
pub fn solve_coref<T: Scalar>(graph: &CorefGraph<T>, oracle: &dyn NeighborOracle, seed: u64) -> Result<(Vec<usize>, T)> {
    let n = graph.nodes;
    let mut uf = UnionFind::new(n);
    let mut cannot: HashMap<usize, Vec<usize>> = HashMap::new();
    for ((a, b), w) in graph.edges() {
        if w == T::infinity() {
            uf.union(a, b);
        } else if w == T::neg_infinity() {
            cannot.entry(a).or_default().push(b);
            cannot.entry(b).or_default().push(a);
        }
    }
    for (&a, bs) in &cannot {
        for &b in bs {
            if uf.find(a) == uf.find(b) {
                return Err(Error::Infeasible(format!("must-link path joins cannot-link nodes {a} and {b}")));
            }
        }
    }
    let root: Vec<usize> = (0..n).map(|v| uf.find(v)).collect();
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, &r) in root.iter().enumerate() {
        members.entry(r).or_default().push(v);
    }
    let mut order: Vec<usize> = members.keys().copied().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut cluster_of: Vec<usize> = vec![usize::MAX; n]; // by super-node root
    let mut buf = Vec::new();
    for &pivot in &order {
        if cluster_of[pivot] != usize::MAX {
            continue;
        }
        cluster_of[pivot] = pivot;
        // aggregate weight from the pivot to each candidate super-node
        let mut agg: BTreeMap<usize, T> = BTreeMap::new();
        for &m in &members[&pivot] {
            buf.clear();
            oracle.neighbors(m, &mut buf);
            for &v in &buf {
                let r = root[v];
                if r == pivot || cluster_of[r] != usize::MAX {
                    continue;
                }
                let w = graph.explicit_weight(m, v).unwrap_or(T::one());
                let e = agg.entry(r).or_insert(T::zero());
                *e = *e + w;
            }
        }
        for (r, w) in agg {
            if w <= T::zero() || w.is_nan() {
                continue;
            }
            let blocked =
                members[&r].iter().any(|&v| cannot.get(&v).is_some_and(|cs| cs.iter().any(|&c| cluster_of[root[c]] == pivot)));
            if !blocked {
                cluster_of[r] = pivot;
            }
        }
    }
    let mut labels = vec![0; n];
    let mut canon: HashMap<usize, usize> = HashMap::new();
    for v in 0..n {
        let c = cluster_of[root[v]];
        labels[v] = *canon.entry(c).or_insert(v);
    }
    let cost = graph.disagreement_cost(&labels);
    Ok((labels, cost))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize, w: impl Fn(usize, usize) -> f64) -> CorefGraph<f64> {
        let mut g = CorefGraph::new(n);
        for a in 0..n {
            for b in a + 1..n {
                g.add_weight(a, b, w(a, b)).unwrap();
            }
        }
        g.index();
        g
    }

    #[test]
    fn all_positive_is_one_cluster() {
        let g = complete(6, |_, _| 1.0);
        let (labels, cost) = solve_coref(&g, &g, 4).unwrap();
        assert!(labels.iter().all(|&l| l == 0));
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn hard_edges_respected() {
        let mut g = complete(4, |_, _| -1.0);
        g.add_weight(0, 3, f64::INFINITY).unwrap();
        g.add_weight(1, 2, 5.0).unwrap();
        g.add_weight(1, 0, f64::NEG_INFINITY).unwrap();
        g.index();
        for seed in 0..20 {
            let (labels, _) = solve_coref(&g, &g, seed).unwrap();
            assert_eq!(labels[0], labels[3]);
            assert_ne!(labels[0], labels[1]);
        }
    }

    #[test]
    fn contradiction_is_infeasible() {
        let mut g = CorefGraph::<f64>::new(3);
        g.add_weight(0, 1, f64::INFINITY).unwrap();
        g.add_weight(1, 2, f64::INFINITY).unwrap();
        g.add_weight(0, 2, f64::NEG_INFINITY).unwrap();
        g.index();
        assert!(matches!(solve_coref(&g, &g, 0), Err(Error::Infeasible(_))));
        assert!(g.clone().add_weight(0, 1, f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn labels_form_equivalence() {
        let g = complete(7, |a, b| if (a + b) % 3 == 0 { 1.0 } else { -1.0 });
        let (labels, cost) = solve_coref(&g, &g, 1).unwrap();
        for v in 0..7 {
            assert!(labels[v] <= v && labels[labels[v]] == labels[v]);
        }
        assert_eq!(cost, g.disagreement_cost(&labels));
    }
}
