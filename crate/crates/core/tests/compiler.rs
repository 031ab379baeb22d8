mod common;

use common::*;
use mln_core::compiler::{assign_tasks, detect_properties, explain, monolithic_plan, Property, TaskKind};
use mln_core::parser::{parse_program, parse_with_evidence};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn asserted_properties_hold_in_every_feasible_world(seed in any::<u64>()) {
        let (text, rel) = random_structure_program(&mut rng(seed));
        let result = sound_properties(&text, rel);
        prop_assert!(result.is_ok(), "{}", result.unwrap_err());
    }

    #[test]
    fn soft_rules_belong_to_one_task(seed in any::<u64>()) {
        let text = random_program(&mut rng(seed));
        let p = parse_program::<f64>(&text).unwrap();
        for plan in [assign_tasks(&p), monolithic_plan(&p)] {
            for r in &p.rules {
                let n = plan.tasks.iter().filter(|t| t.rules.contains(&r.index)).count();
                if r.is_hard() {
                    prop_assert!(n >= 1);
                } else {
                    prop_assert_eq!(n, 1);
                }
            }
            let mut sigma = plan.sigma.clone();
            sigma.sort();
            prop_assert_eq!(sigma, (0..plan.tasks.len()).collect::<Vec<_>>());
        }
    }
}

#[test]
fn equivalence_axioms_are_recognized() {
    let p =
        parse_program::<f64>("c = {A, B}\n*r(c, c)\ninf: r(x, x)\ninf: r(x, y) => r(y, x)\ninf: r(x, y), r(y, z) => r(x, z)\n")
            .unwrap();
    let props = detect_properties(&p, "r");
    for q in [Property::Ref, Property::Sym, Property::Trn] {
        assert!(props.contains(&q), "{q} missing");
    }
    assert!(!props.contains(&Property::Key));
}

#[test]
fn affiliation_plan() {
    let p =
        parse_with_evidence::<f64>(include_str!("fixtures/affiliation.mln"), include_str!("fixtures/affiliation.db")).unwrap();
    let plan = assign_tasks(&p);
    let kind = |rel: &str| plan.tasks.iter().find(|t| t.owned.iter().any(|o| o == rel)).unwrap().kind;
    assert_eq!(kind("pCoref"), TaskKind::Coref);
    assert_eq!(kind("affil"), TaskKind::SimpleClassification);
    let text = explain(&plan);
    assert!(text.contains("pCoref") && text.contains("affil"));
}
