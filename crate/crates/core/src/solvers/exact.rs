use super::SubProblem;
use crate::error::{Error, Result};
use crate::logic::World;
use crate::scalar::{log_sum_exp, Scalar};

/// Components up to this many atoms are solved by enumeration.
pub const EXACT_LIMIT: usize = 16;

struct Masks<T> {
    pos: u64,
    neg: u64,
    cost_if_true: T,
    cost_if_false: T,
}

fn compile<T: Scalar>(sub: &SubProblem<T>) -> Result<Vec<Masks<T>>> {
    let n = sub.len();
    if n > 62 {
        return Err(Error::TooLarge { atoms: n, limit: 62 });
    }
    Ok(sub
        .clauses
        .iter()
        .map(|c| {
            let (mut pos, mut neg) = (0u64, 0u64);
            for l in &c.literals {
                let bit = 1u64 << (n - 1 - l.atom);
                if l.positive {
                    pos |= bit;
                } else {
                    neg |= bit;
                }
            }
            let m = c.weight.magnitude();
            let (t, f) = if c.weight.is_positive() { (T::zero(), m) } else { (m, T::zero()) };
            Masks { pos, neg, cost_if_true: t, cost_if_false: f }
        })
        .collect())
}

fn mask_cost<T: Scalar>(sub: &SubProblem<T>, masks: &[Masks<T>], mask: u64) -> T {
    let n = sub.len();
    let mut c = sub.offset;
    for (i, &p) in sub.priors.iter().enumerate() {
        if mask >> (n - 1 - i) & 1 == 1 {
            c = c + p;
        }
    }
    for m in masks {
        let sat = mask & m.pos != 0 || !mask & m.neg != 0;
        c = c + if sat { m.cost_if_true } else { m.cost_if_false };
    }
    c
}

fn to_world(mask: u64, n: usize) -> World {
    (0..n).map(|i| mask >> (n - 1 - i) & 1 == 1).collect()
}

/// Minimum-cost world by enumeration; ties go to the lexicographically least
/// world (local atom 0 most significant, false before true).
pub fn exact_map<T: Scalar>(sub: &SubProblem<T>) -> Result<(World, T)> {
    let masks = compile(sub)?;
    let n = sub.len();
    let mut best = (0u64, T::infinity());
    for mask in 0..(1u64 << n) {
        let c = mask_cost(sub, &masks, mask);
        if c < best.1 {
            best = (mask, c);
        }
    }
    if best.1.is_infinite() {
        return Err(Error::Infeasible("every assignment violates a hard clause".into()));
    }
    Ok((to_world(best.0, n), best.1))
}

/// Exact marginals and `log Z` where `Z = sum(exp(-cost))`.
pub fn exact_marginals<T: Scalar>(sub: &SubProblem<T>) -> Result<(Vec<T>, T)> {
    let masks = compile(sub)?;
    let n = sub.len();
    let logw: Vec<T> = (0..(1u64 << n)).map(|m| -mask_cost(sub, &masks, m)).collect();
    let log_z = log_sum_exp(&logw);
    if log_z == T::neg_infinity() {
        return Err(Error::Infeasible("every assignment violates a hard clause".into()));
    }
    let mut marg = vec![T::zero(); n];
    for (mask, &lw) in logw.iter().enumerate() {
        if lw == T::neg_infinity() {
            continue;
        }
        let p = (lw - log_z).exp();
        for (i, m) in marg.iter_mut().enumerate() {
            if (mask as u64) >> (n - 1 - i) & 1 == 1 {
                *m = *m + p;
            }
        }
    }
    Ok((marg, log_z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{brute_force_map, brute_force_marginals, GroundClause, GroundLiteral, Weight};

    fn problem() -> SubProblem<f64> {
        let l = |a, p| GroundLiteral { atom: a, positive: p };
        let cs = vec![
            GroundClause::new(Weight::Soft(1.5), vec![l(0, true), l(1, true)], 0).unwrap(),
            GroundClause::new(Weight::Soft(-0.7), vec![l(1, true), l(2, false)], 0).unwrap(),
            GroundClause::new(Weight::Hard, vec![l(0, false), l(2, false)], 0).unwrap(),
        ];
        let mut s = SubProblem::from_clauses(&cs, 1.0);
        s.priors = vec![0.4, -0.3, 0.0];
        s
    }

    #[test]
    fn agrees_with_oracles() {
        let s = problem();
        let db = s.to_database();
        let (w, c) = exact_map(&s).unwrap();
        let (bw, bc) = brute_force_map(&db).unwrap();
        assert_eq!(w, bw);
        assert!((c - bc).abs() < 1e-12);
        let (m, _) = exact_marginals(&s).unwrap();
        for (a, b) in m.iter().zip(brute_force_marginals(&db).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_problem() {
        let s = SubProblem::<f64> { atoms: vec![], clauses: vec![], priors: vec![], offset: 2.0 };
        assert_eq!(exact_map(&s).unwrap(), (vec![], 2.0));
        let (m, z) = exact_marginals(&s).unwrap();
        assert!(m.is_empty() && (z + 2.0).abs() < 1e-12);
    }
}
