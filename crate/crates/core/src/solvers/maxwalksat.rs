use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SubProblem;
use crate::logic::World;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct MwsConfig {
    /// Probability of a random walk step.
    pub noise: f64,
    /// Flips per restart.
    pub flips: usize,
    pub restarts: usize,
}

impl Default for MwsConfig {
    fn default() -> Self {
        MwsConfig { noise: 0.5, flips: 100_000, restarts: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MwsResult<T> {
    pub world: World,
    /// Exact cost of `world`; `+inf` when a hard clause is violated.
    pub cost: T,
    pub feasible: bool,
}

struct State<'a> {
    weights: Vec<f64>,
    positive: Vec<bool>,
    lits: Vec<&'a [crate::logic::GroundLiteral]>,
    occ: Vec<Vec<usize>>,
    world: Vec<bool>,
    true_count: Vec<u32>,
    violated: Vec<usize>,
    slot: Vec<usize>,
    cost: f64,
}

impl<'a> State<'a> {
    fn is_violated(&self, c: usize) -> bool {
        (self.true_count[c] > 0) != self.positive[c]
    }

    fn reset(&mut self, world: Vec<bool>) {
        self.world = world;
        self.violated.clear();
        self.cost = 0.0;
        for c in 0..self.lits.len() {
            self.true_count[c] = self.lits[c].iter().filter(|l| self.world[l.atom] == l.positive).count() as u32;
            self.slot[c] = usize::MAX;
            if self.is_violated(c) {
                self.slot[c] = self.violated.len();
                self.violated.push(c);
                self.cost += self.weights[c];
            }
        }
    }

    fn delta(&self, atom: usize) -> f64 {
        let mut d = 0.0;
        for &c in &self.occ[atom] {
            let lit = self.lits[c].iter().find(|l| l.atom == atom).expect("occurrence");
            let was_true = self.world[atom] == lit.positive;
            let count = if was_true { self.true_count[c] - 1 } else { self.true_count[c] + 1 };
            let now = (count > 0) != self.positive[c];
            let before = self.is_violated(c);
            if now != before {
                d += if now { self.weights[c] } else { -self.weights[c] };
            }
        }
        d
    }

    fn flip(&mut self, atom: usize) {
        self.world[atom] = !self.world[atom];
        for i in 0..self.occ[atom].len() {
            let c = self.occ[atom][i];
            let before = self.is_violated(c);
            let lit = self.lits[c].iter().find(|l| l.atom == atom).expect("occurrence");
            if self.world[atom] == lit.positive {
                self.true_count[c] += 1;
            } else {
                self.true_count[c] -= 1;
            }
            let now = self.is_violated(c);
            if before && !now {
                let s = self.slot[c];
                let last = *self.violated.last().expect("nonempty");
                self.violated.swap_remove(s);
                if last != c {
                    self.slot[last] = s;
                }
                self.slot[c] = usize::MAX;
                self.cost -= self.weights[c];
            } else if !before && now {
                self.slot[c] = self.violated.len();
                self.violated.push(c);
                self.cost += self.weights[c];
            }
        }
    }
}

/// Weighted MaxSAT local search. Priors are handled as unit clauses; hard
/// clauses get a surrogate weight larger than all soft weights combined.
pub fn solve_generic_map<T: Scalar>(sub: &SubProblem<T>, config: &MwsConfig, seed: u64) -> MwsResult<T> {
    let enc = sub.with_singletons();
    let n = enc.len();
    let soft_total: f64 = enc.clauses.iter().filter(|c| !c.weight.is_hard()).map(|c| c.weight.magnitude().as_f64()).sum();
    let hard_weight = 1e4 + soft_total;
    let mut st = State {
        weights: enc
            .clauses
            .iter()
            .map(|c| if c.weight.is_hard() { hard_weight } else { c.weight.magnitude().as_f64() })
            .collect(),
        positive: enc.clauses.iter().map(|c| c.weight.is_positive()).collect(),
        lits: enc.clauses.iter().map(|c| c.literals.as_slice()).collect(),
        occ: enc.occurrences(),
        world: vec![false; n],
        true_count: vec![0; enc.clauses.len()],
        violated: Vec::new(),
        slot: vec![usize::MAX; enc.clauses.len()],
        cost: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(World, f64)> = None;
    'restarts: for _ in 0..config.restarts.max(1) {
        let mut w: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        for c in enc.clauses.iter().filter(|c| c.weight.is_hard() && c.literals.len() == 1) {
            w[c.literals[0].atom] = c.literals[0].positive;
        }
        st.reset(w);
        if best.as_ref().is_none_or(|b| st.cost < b.1) {
            best = Some((st.world.clone(), st.cost));
        }
        for _ in 0..config.flips {
            if st.violated.is_empty() {
                break 'restarts;
            }
            let c = st.violated[rng.gen_range(0..st.violated.len())];
            let lits = st.lits[c];
            let atom = if rng.gen_bool(config.noise) {
                lits[rng.gen_range(0..lits.len())].atom
            } else {
                let mut pick = lits[0].atom;
                let mut pick_d = f64::INFINITY;
                for l in lits {
                    let d = st.delta(l.atom);
                    if d < pick_d {
                        pick_d = d;
                        pick = l.atom;
                    }
                }
                pick
            };
            st.flip(atom);
            if st.cost < best.as_ref().expect("set").1 - 1e-9 {
                best = Some((st.world.clone(), st.cost));
            }
        }
    }
    if st.violated.is_empty() {
        best = Some((st.world.clone(), 0.0));
    }
    let world = best.expect("at least one restart").0;
    let cost = sub.cost(&world);
    MwsResult { feasible: cost.is_finite(), world, cost }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{GroundClause, GroundLiteral, Weight};

    fn unit(atom: usize, positive: bool, w: Weight<f64>) -> GroundClause<f64> {
        GroundClause::new(w, vec![GroundLiteral { atom, positive }], 0).unwrap()
    }

    #[test]
    fn single_unit_clause() {
        let s = SubProblem::from_clauses(&[unit(0, true, Weight::Soft(1.0))], 1.0);
        let r = solve_generic_map(&s, &MwsConfig::default(), 1);
        assert_eq!(r.world, vec![true]);
        assert_eq!(r.cost, 0.0);
    }

    #[test]
    fn seeded_runs_repeat() {
        let l = |a, p| GroundLiteral { atom: a, positive: p };
        let cs: Vec<GroundClause<f64>> = (0..12)
            .map(|i| {
                GroundClause::new(Weight::Soft(1.0 + i as f64 * 0.1), vec![l(i, i % 2 == 0), l((i + 5) % 12, i % 3 == 0)], 0)
                    .unwrap()
            })
            .collect();
        let s = SubProblem::from_clauses(&cs, 1.0);
        let cfg = MwsConfig { flips: 200, ..MwsConfig::default() };
        assert_eq!(solve_generic_map(&s, &cfg, 9), solve_generic_map(&s, &cfg, 9));
    }

    #[test]
    fn reports_infeasible() {
        let cs = [unit(0, true, Weight::Hard), unit(0, false, Weight::Hard)];
        let s = SubProblem::from_clauses(&cs, 1.0);
        let r = solve_generic_map(&s, &MwsConfig { flips: 50, ..MwsConfig::default() }, 0);
        assert!(!r.feasible);
    }
}
