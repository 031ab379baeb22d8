use super::{GroundClause, GroundDatabase};
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};

/// Truth assignment to the query atoms of a ground database, indexed by atom id.
pub type World = Vec<bool>;

/// Largest instance the exhaustive MAP oracle accepts.
pub const MAP_ORACLE_LIMIT: usize = 25;
/// Largest instance the exhaustive marginal oracle accepts.
pub const MARGINAL_ORACLE_LIMIT: usize = 20;

pub fn clause_satisfied<T: Scalar>(clause: &GroundClause<T>, world: &[bool]) -> bool {
    clause.literals.iter().any(|l| world[l.atom] == l.positive)
}

/// A positive (or hard) clause is violated when false; a negative one when true.
pub fn clause_violated<T: Scalar>(clause: &GroundClause<T>, world: &[bool]) -> bool {
    clause_satisfied(clause, world) != clause.weight.is_positive()
}

/// Total cost of `world`, including the evidence-determined constant.
/// `+inf` when a hard clause is violated.
pub fn world_cost<T: Scalar>(db: &GroundDatabase<T>, world: &[bool]) -> T {
    let mut cost = db.fixed_cost;
    for c in &db.clauses {
        if clause_violated(c, world) {
            cost = cost + c.weight.magnitude();
        }
    }
    cost
}

fn world_from_mask(mask: u64, n: usize) -> World {
    (0..n).map(|i| mask >> (n - 1 - i) & 1 == 1).collect()
}

/// Exhaustive MAP. Among equal-cost worlds returns the lexicographically
/// least one (atom 0 most significant, false < true).
pub fn brute_force_map<T: Scalar>(db: &GroundDatabase<T>) -> Result<(World, T)> {
    let n = db.num_atoms();
    if n > MAP_ORACLE_LIMIT {
        return Err(Error::TooLarge { atoms: n, limit: MAP_ORACLE_LIMIT });
    }
    let mut best: Option<(u64, T)> = None;
    for mask in 0..(1u64 << n) {
        let c = world_cost(db, &world_from_mask(mask, n));
        if best.is_none_or(|(_, b)| c < b) {
            best = Some((mask, c));
        }
    }
    let (mask, cost) = best.expect("at least one world");
    if cost.is_infinite() {
        return Err(Error::Infeasible("every world violates a hard clause".into()));
    }
    Ok((world_from_mask(mask, n), cost))
}

/// Exhaustive marginals `Pr[x_i = 1]` under `Pr(w) ∝ exp(-cost(w))`.
pub fn brute_force_marginals<T: Scalar>(db: &GroundDatabase<T>) -> Result<Vec<T>> {
    let n = db.num_atoms();
    if n > MARGINAL_ORACLE_LIMIT {
        return Err(Error::TooLarge { atoms: n, limit: MARGINAL_ORACLE_LIMIT });
    }
    let mut all = Vec::with_capacity(1 << n);
    let mut on: Vec<Vec<T>> = vec![Vec::new(); n];
    for mask in 0..(1u64 << n) {
        let w = world_from_mask(mask, n);
        let lw = -(world_cost(db, &w) - db.fixed_cost);
        all.push(lw);
        for (i, &b) in w.iter().enumerate() {
            if b {
                on[i].push(lw);
            }
        }
    }
    let z = log_sum_exp(&all);
    if z == T::neg_infinity() {
        return Err(Error::Infeasible("every world violates a hard clause".into()));
    }
    Ok(on.iter().map(|v| (log_sum_exp(v) - z).exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{GroundLiteral, Weight};

    fn lit(atom: usize, positive: bool) -> GroundLiteral {
        GroundLiteral { atom, positive }
    }

    fn happy_sad() -> GroundDatabase<f64> {
        // x0 = happy, x1 = sad
        let clauses = vec![
            GroundClause::new(Weight::Soft(1.0), vec![lit(0, true)], 0).unwrap(),
            GroundClause::new(Weight::Soft(5.0), vec![lit(0, false), lit(1, false)], 1).unwrap(),
            GroundClause::new(Weight::Soft(5.0), vec![lit(0, true), lit(1, true)], 2).unwrap(),
        ];
        GroundDatabase::propositional(2, clauses)
    }

    #[test]
    fn costs_of_all_worlds() {
        let db = happy_sad();
        assert_eq!(world_cost(&db, &[true, true]), 5.0);
        assert_eq!(world_cost(&db, &[true, false]), 0.0);
        assert_eq!(world_cost(&db, &[false, true]), 1.0);
        assert_eq!(world_cost(&db, &[false, false]), 6.0);
    }

    #[test]
    fn map_and_marginals() {
        let db = happy_sad();
        let (w, c) = brute_force_map(&db).unwrap();
        assert_eq!(w, vec![true, false]);
        assert_eq!(c, 0.0);
        let m = brute_force_marginals(&db).unwrap();
        let z = 1.0 + (-1.0f64).exp() + (-5.0f64).exp() + (-6.0f64).exp();
        assert!((m[0] - (1.0 + (-5.0f64).exp()) / z).abs() < 1e-12);
    }

    #[test]
    fn negative_weight_violated_when_true() {
        let c = GroundClause::new(Weight::Soft(-2.0), vec![lit(0, true)], 0).unwrap();
        assert!(clause_violated(&c, &[true]));
        assert!(!clause_violated(&c, &[false]));
    }

    #[test]
    fn hard_infeasible() {
        let clauses = vec![
            GroundClause::new(Weight::<f64>::Hard, vec![lit(0, true)], 0).unwrap(),
            GroundClause::new(Weight::Hard, vec![lit(0, false)], 0).unwrap(),
        ];
        let db = GroundDatabase::propositional(1, clauses);
        assert!(matches!(brute_force_map(&db), Err(Error::Infeasible(_))));
        assert!(matches!(brute_force_marginals(&db), Err(Error::Infeasible(_))));
    }

    #[test]
    fn tautology_rejected() {
        assert!(GroundClause::new(Weight::Soft(1.0f64), vec![lit(0, true), lit(0, false)], 0).is_none());
    }
}
