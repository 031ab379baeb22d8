mod common;

use std::fmt::Write;

use common::*;
use mln_core::logic::{brute_force_map, brute_force_marginals, clause_violated, ground, world_cost, GroundDatabase, Weight};
use mln_core::parser::parse_with_evidence;
use mln_core::Error;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Rules over evidence predicates `e0`, `e1` and query predicates `q0`, `q1`
/// on three constants, with random evidence. The second program declares the
/// evidence predicates as query predicates pinned by hard unit clauses.
fn evidence_pair(rng: &mut ChaCha8Rng) -> (String, String, String) {
    let consts = ["A", "B", "C"];
    let mut rules = String::new();
    for _ in 0..rng.gen_range(2..=6) {
        let lifted = rng.gen_bool(0.4);
        let mut lits = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let p = ["e0", "e1", "q0", "q1"][rng.gen_range(0..4)];
            let arg = if lifted { "x" } else { consts[rng.gen_range(0..3)] };
            let l = format!("{}{p}({arg})", if rng.gen_bool(0.5) { "!" } else { "" });
            if !lits.iter().any(|o: &String| o.trim_start_matches('!') == l.trim_start_matches('!')) {
                lits.push(l);
            }
        }
        let w = if rng.gen_bool(0.1) { "inf".to_string() } else { format!("{}", rng.gen_range(-30..=30) as f64 / 10.0 + 0.05) };
        writeln!(rules, "{w}: {}", lits.join(" v ")).unwrap();
    }
    let mut evidence = String::new();
    let mut pins = String::new();
    for p in ["e0", "e1"] {
        for c in consts {
            if rng.gen_bool(0.5) {
                writeln!(evidence, "{p}({c})").unwrap();
                writeln!(pins, "inf: {p}({c})").unwrap();
            } else {
                writeln!(pins, "inf: !{p}({c})").unwrap();
            }
        }
    }
    let closed = format!("c = {{A, B, C}}\ne0(c)\ne1(c)\n*q0(c)\n*q1(c)\n{rules}");
    let open = format!("c = {{A, B, C}}\n*e0(c)\n*e1(c)\n*q0(c)\n*q1(c)\n{rules}{pins}");
    (closed, open, evidence)
}

fn marginal(g: &GroundDatabase<f64>, m: &[f64], pred: &str, c: &str) -> f64 {
    g.lookup(pred, &[c]).map_or(0.5, |a| m[a])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn evidence_elimination_preserves_the_distribution(seed in any::<u64>()) {
        let (closed, open, ev) = evidence_pair(&mut rng(seed));
        let a = ground(&parse_with_evidence::<f64>(&closed, &ev).unwrap()).unwrap();
        let b = ground(&parse_with_evidence::<f64>(&open, "").unwrap()).unwrap();
        prop_assert!(a.atoms().iter().all(|x| a.predicates[x.predicate].is_query()));
        match (brute_force_map(&a), brute_force_map(&b)) {
            (Ok((_, ca)), Ok((_, cb))) => {
                prop_assert!(close(ca, cb, 1e-9), "{} vs {}\n{}", ca, cb, closed);
                let (ma, mb) = (brute_force_marginals(&a).unwrap(), brute_force_marginals(&b).unwrap());
                for p in ["q0", "q1"] {
                    for c in ["A", "B", "C"] {
                        prop_assert!((marginal(&a, &ma, p, c) - marginal(&b, &mb, p, c)).abs() < 1e-9);
                    }
                }
            }
            (Err(Error::Infeasible(_)), Err(Error::Infeasible(_))) => {}
            (x, y) => prop_assert!(false, "{:?} vs {:?}\n{}", x.map(|r| r.1), y.map(|r| r.1), closed),
        }
    }

    #[test]
    fn world_cost_sums_violated_clauses(seed in any::<u64>(), mask in any::<u32>()) {
        let text = random_program(&mut rng(seed));
        let g = ground(&mln_core::parser::parse_program::<f64>(&text).unwrap()).unwrap();
        let world: Vec<bool> = (0..g.num_atoms()).map(|a| mask >> a & 1 == 1).collect();
        let mut want = g.fixed_cost;
        for c in &g.clauses {
            let sat = c.literals.iter().any(|l| world[l.atom] == l.positive);
            prop_assert_eq!(clause_violated(c, &world), sat != c.weight.is_positive());
            if sat != c.weight.is_positive() {
                want += match c.weight { Weight::Hard => f64::INFINITY, Weight::Soft(w) => w.abs() };
            }
        }
        prop_assert_eq!(world_cost(&g, &world), want);
        prop_assert!(want >= 0.0);
        let doubled = g.scaled(2.0);
        if want.is_finite() {
            prop_assert!(close(world_cost(&doubled, &world), 2.0 * want, 1e-12));
        }
    }

    #[test]
    fn grounding_is_deterministic(seed in any::<u64>()) {
        let text = random_program(&mut rng(seed));
        let p = mln_core::parser::parse_program::<f64>(&text).unwrap();
        let (a, b) = (ground(&p).unwrap(), ground(&p).unwrap());
        let names = |g: &GroundDatabase<f64>| (0..g.num_atoms()).map(|i| g.atom_name(i)).collect::<Vec<_>>();
        prop_assert_eq!(names(&a), names(&b));
        prop_assert_eq!(&a.clauses, &b.clauses);
        let mut sorted = names(&a);
        sorted.sort();
        prop_assert_eq!(sorted, names(&a));
    }
}

#[test]
fn marginals_are_probabilities() {
    let mut r = rng(4);
    for _ in 0..50 {
        let text = random_program(&mut r);
        let g = ground(&mln_core::parser::parse_program::<f64>(&text).unwrap()).unwrap();
        if let Ok(m) = brute_force_marginals(&g) {
            assert!(m.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
