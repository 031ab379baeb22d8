use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::maxwalksat::{solve_generic_map, MwsConfig};
use super::subproblem::clause_cost;
use super::SubProblem;
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    /// Sweeps averaged after burn-in.
    pub samples: usize,
    pub burn_in: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig { samples: 5_000, burn_in: 500 }
    }
}

/// Gibbs sampling over all atoms. The estimate averages the conditional
/// probability of each atom at every sweep rather than its sampled value.
/// Hard clauses make some conditionals deterministic; the chain starts from a
/// feasible world found by local search.
pub fn solve_generic_marginal<T: Scalar>(sub: &SubProblem<T>, config: &GibbsConfig, seed: u64) -> Result<Vec<T>> {
    let n = sub.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut world: Vec<bool> = if sub.has_hard_clauses() {
        let start = solve_generic_map(sub, &MwsConfig { flips: 10_000, ..MwsConfig::default() }, rng.gen());
        if !start.feasible {
            return Err(Error::Infeasible("no world satisfying the hard clauses was found".into()));
        }
        start.world
    } else {
        (0..n).map(|_| rng.gen()).collect()
    };
    let occ = sub.occurrences();
    let mut sums = vec![0.0f64; n];
    let local_cost = |world: &mut Vec<bool>, i: usize, v: bool| -> T {
        world[i] = v;
        let mut c = if v { sub.priors[i] } else { T::zero() };
        for &ci in &occ[i] {
            c = c + clause_cost(&sub.clauses[ci], world);
        }
        c
    };
    for sweep in 0..config.burn_in + config.samples {
        for i in 0..n {
            let keep = world[i];
            let c1 = local_cost(&mut world, i, true);
            let c0 = local_cost(&mut world, i, false);
            world[i] = keep;
            let p = match (c0.is_infinite(), c1.is_infinite()) {
                (true, true) => continue,
                (true, false) => 1.0,
                (false, true) => 0.0,
                (false, false) => sigmoid(c0 - c1).as_f64(),
            };
            world[i] = rng.gen::<f64>() < p;
            if sweep >= config.burn_in {
                sums[i] += p;
            }
        }
    }
    let denom = config.samples.max(1) as f64;
    Ok(sums.into_iter().map(|s| T::of(s / denom)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{GroundClause, GroundLiteral, Weight};

    #[test]
    fn free_atoms_are_fair() {
        let s = SubProblem::<f64> { atoms: vec![0, 1], clauses: vec![], priors: vec![0.0, 0.0], offset: 0.0 };
        let m = solve_generic_marginal(&s, &GibbsConfig { samples: 10_000, burn_in: 100 }, 3).unwrap();
        assert!(m.iter().all(|p| (p - 0.5).abs() < 0.02));
    }

    #[test]
    fn unit_clause_closed_form() {
        let c = GroundClause::new(Weight::Soft(2.0), vec![GroundLiteral { atom: 0, positive: true }], 0).unwrap();
        let s = SubProblem::from_clauses(&[c], 1.0);
        let m = solve_generic_marginal(&s, &GibbsConfig { samples: 10_000, burn_in: 100 }, 5).unwrap();
        assert!((m[0] - 0.880_797f64).abs() < 0.02);
    }
}
