mod common;

use common::{close, random_program, rng};
use mln_core::compiler::{assign_tasks, TaskKind};
use mln_core::logic::{brute_force_map, brute_force_marginals, ground, GroundDatabase};
use mln_core::master::{run_map, run_marginal, Decomposition, MasterConfig, StepSchedule};
use mln_core::parser::{parse_program, parse_with_evidence};
use proptest::prelude::*;

fn packers() -> (GroundDatabase<f64>, mln_core::compiler::LogicalPlan) {
    let p = parse_with_evidence::<f64>(include_str!("fixtures/packers.mln"), include_str!("fixtures/packers.db")).unwrap();
    let plan = assign_tasks(&p);
    (ground(&p).unwrap(), plan)
}

#[test]
fn packers_plan() {
    let (g, plan) = packers();
    let kinds: Vec<TaskKind> = plan.tasks.iter().map(|t| t.kind).collect();
    assert_eq!(kinds, vec![TaskKind::CorrelatedClassification, TaskKind::SimpleClassification]);
    let dec = Decomposition::new(&g, &plan, 1.0);
    let names: Vec<String> = dec.registry.atoms.iter().map(|&a| g.atom_name(a)).collect();
    assert_eq!(names, vec!["label(D, P1, L)", "label(D, P1, W)"]);
}

#[test]
fn packers_first_map_step() {
    let (g, plan) = packers();
    let cfg = MasterConfig { max_iters: 1, schedule: StepSchedule::constant(0.5), ..MasterConfig::default() };
    let out = run_map(&g, &plan, &cfg).unwrap();
    let w = out.registry.atoms.iter().position(|&a| g.atom_name(a) == "label(D, P1, W)").unwrap();
    let l = 1 - w;
    assert_eq!(out.registry.copies[w], vec![Some(1.0), Some(0.0)]);
    assert_eq!(out.multipliers.lambda[w], vec![0.25, -0.25]);
    assert_eq!(out.multipliers.lambda[l], vec![0.0, 0.0]);
}

fn random_instance(seed: u64) -> (GroundDatabase<f64>, mln_core::compiler::LogicalPlan) {
    let p = parse_program::<f64>(&random_program(&mut rng(seed))).unwrap();
    (ground(&p).unwrap(), assign_tasks(&p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn map_invariants(seed in any::<u64>()) {
        let (g, plan) = random_instance(seed);
        let Ok((_, opt)) = brute_force_map(&g) else { return Ok(()) };
        let cfg = MasterConfig { seed, ..MasterConfig::default() };
        let out = run_map(&g, &plan, &cfg).unwrap();
        prop_assert!(out.stats.iterations.iter().all(|s| s.multiplier_drift == 0.0));
        prop_assert_eq!(out.multipliers.max_abs_sum(), 0.0);
        let primal: Vec<f64> = out.stats.iterations.iter().filter_map(|s| s.best_primal).collect();
        prop_assert!(primal.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(out.cost >= opt - 1e-9);
        if out.certified {
            prop_assert!(close(out.cost, opt, 1e-9));
        }
        let again = run_map(&g, &plan, &cfg).unwrap();
        prop_assert_eq!(&again.world, &out.world);
        prop_assert_eq!(again.stats.iterations.len(), out.stats.iterations.len());
    }

    #[test]
    fn marginal_invariants(seed in any::<u64>()) {
        let (g, plan) = random_instance(seed);
        if brute_force_marginals(&g).is_err() {
            return Ok(());
        }
        let cfg = MasterConfig { seed, max_iters: 20, ..MasterConfig::default() };
        let out = run_marginal(&g, &plan, &cfg).unwrap();
        prop_assert_eq!(out.marginals.len(), g.num_atoms());
        prop_assert!(out.marginals.iter().all(|p| (0.0..=1.0).contains(p)));
        prop_assert!(out.stats.iterations.iter().all(|s| s.multiplier_drift == 0.0));
        let again = run_marginal(&g, &plan, &cfg).unwrap();
        prop_assert_eq!(again.marginals, out.marginals);
    }
}

#[test]
fn single_task_needs_no_reconciliation() {
    let p = parse_program::<f64>("c = {A, B}\n*q(c)\n*s(c)\n2: q(x) => s(x)\n1: q(A)\n-1: s(B)\n").unwrap();
    let g = ground(&p).unwrap();
    let plan = mln_core::compiler::monolithic_plan(&p);
    let out = run_map(&g, &plan, &MasterConfig::default()).unwrap();
    assert!(out.certified);
    assert!(out.registry.is_empty());
    assert!(close(out.cost, brute_force_map(&g).unwrap().1, 1e-12));
}

#[test]
fn single_precision_pipeline() {
    let (mln, db) = (include_str!("fixtures/affiliation.mln"), include_str!("fixtures/affiliation.db"));
    let p32 = parse_with_evidence::<f32>(mln, db).unwrap();
    let p64 = parse_with_evidence::<f64>(mln, db).unwrap();
    let (g32, g64) = (ground(&p32).unwrap(), ground(&p64).unwrap());
    let a = run_map(&g32, &assign_tasks(&p32), &MasterConfig::default()).unwrap();
    let b = run_map(&g64, &assign_tasks(&p64), &MasterConfig::default()).unwrap();
    assert!(((a.cost as f64) - b.cost).abs() <= 1e-3 * b.cost.abs().max(1.0));
    let m = run_marginal(&g32, &assign_tasks(&p32), &MasterConfig { max_iters: 10, ..MasterConfig::default() }).unwrap();
    assert!(m.marginals.iter().all(|p| (0.0..=1.0).contains(p)));
}
