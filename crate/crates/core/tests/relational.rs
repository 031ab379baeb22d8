mod common;

use common::*;
use mln_core::relational::{
    choose_plan, eager_blocks, eval_eager, exec_cost, filter_binding, lazy_blocks, nested_loop_oracle, plan_for, CostModelParams,
    MaterializedView,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_plan_answers_like_the_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let db = random_database(&mut r);
        let (view, blocks, binding) = random_triple(&mut r);
        let params = CostModelParams::default();
        let want = filter_binding(&view, &nested_loop_oracle(&view, &db).unwrap(), &binding);
        prop_assert_eq!(&filter_binding(&view, eval_eager(&view, &db).unwrap().tuples(), &binding), &want);
        for b in [blocks, eager_blocks(view.body.len()), lazy_blocks(view.body.len())] {
            let plan = plan_for(&view, &db, b, &params).unwrap();
            let got = MaterializedView::new(&view, &plan, &db).unwrap().eval_bound(&binding).unwrap();
            prop_assert_eq!(&got, &want, "blocks {:?}", plan.blocks);
        }
    }

    #[test]
    fn chosen_plan_is_no_worse_than_the_extremes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let db = random_database(&mut r);
        let (view, _, _) = random_triple(&mut r);
        let params = CostModelParams::default();
        let chosen = choose_plan(&view, &db, &params).unwrap();
        let k = view.body.len();
        for b in [eager_blocks(k), lazy_blocks(k)] {
            prop_assert!(chosen.cost.total <= exec_cost(&view, &db, &b, &params).unwrap().total + 1e-9);
        }
        let mut covered: Vec<usize> = chosen.blocks.concat();
        covered.sort();
        prop_assert_eq!(covered, (0..k).collect::<Vec<_>>());
    }
}

#[test]
fn workload_plans_agree() {
    let db = coref_workload(400, 3);
    let view = coref_dmo(400);
    let params = CostModelParams::default();
    let k = view.body.len();
    let full = eval_eager(&view, &db).unwrap();
    for b in [eager_blocks(k), lazy_blocks(k), choose_plan(&view, &db, &params).unwrap().blocks] {
        let mv = MaterializedView::new(&view, &plan_for(&view, &db, b, &params).unwrap(), &db).unwrap();
        for m in ["m0", "m7", "m399"] {
            let s = db.symbols.get(m).unwrap();
            assert_eq!(mv.eval_bound(&[s]).unwrap(), filter_binding(&view, full.tuples(), &[s]));
        }
    }
}
