#![allow(dead_code)]

use std::fmt::Write;

use std::collections::{BTreeSet, HashMap};

use mln_core::compiler::{analyze_relation, Property, RelationInfo};
use mln_core::logic::{ground, world_cost, GroundClause, GroundDatabase, GroundLiteral, Weight};
use mln_core::parser::parse_program;
use mln_core::relational::{AdornedView, Database, Subgoal};
use mln_core::solvers::{ChainModel, ClassificationInput, CorefGraph};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn lit(atom: usize, positive: bool) -> GroundLiteral {
    GroundLiteral { atom, positive }
}

/// Clause that is violated exactly when every atom in `on` is true and every
/// atom in `off` is false, costing `c` then (hard when `c` is `+inf`).
/// Returns the constant the clause's cost is shifted by: a negative cost
/// is encoded as a negative-weight clause, which costs `|c|` in every other
/// configuration.
fn indicator(on: &[usize], off: &[usize], c: f64, out: &mut Vec<GroundClause<f64>>) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    let lits: Vec<GroundLiteral> = on.iter().map(|&a| lit(a, false)).chain(off.iter().map(|&a| lit(a, true))).collect();
    let w = if c == f64::INFINITY { Weight::Hard } else { Weight::Soft(c) };
    if lits.is_empty() {
        return if c > 0.0 { c } else { 0.0 };
    }
    out.push(GroundClause::new(w, lits, 0).expect("distinct atoms"));
    if c < 0.0 {
        -c
    } else {
        0.0
    }
}

fn at_most_one(atoms: &[usize], out: &mut Vec<GroundClause<f64>>) {
    for (i, &a) in atoms.iter().enumerate() {
        for &b in &atoms[i + 1..] {
            out.push(GroundClause::new(Weight::Hard, vec![lit(a, false), lit(b, false)], 0).unwrap());
        }
    }
}

/// Classification instance as a ground database over atoms
/// `o * classes + x`. The returned shift `s` satisfies
/// `solver penalty sum = world_cost - s`.
pub fn classification_db(input: &ClassificationInput<f64>) -> (GroundDatabase<f64>, f64) {
    let n = input.objects * input.classes;
    let mut clauses = Vec::new();
    let mut shift = 0.0;
    for &(o, x, f) in &input.instance {
        let a = o * input.classes + x;
        let w = input.model[f];
        // a fired feature lowers the class penalty by w: cost -w when true
        if w == f64::INFINITY {
            shift += indicator(&[], &[a], f64::INFINITY, &mut clauses);
        } else if w == f64::NEG_INFINITY {
            shift += indicator(&[a], &[], f64::INFINITY, &mut clauses);
        } else {
            shift += indicator(&[a], &[], -w, &mut clauses);
        }
    }
    if input.classes > 1 {
        for o in 0..input.objects {
            let atoms: Vec<usize> = (0..input.classes).map(|x| o * input.classes + x).collect();
            at_most_one(&atoms, &mut clauses);
        }
    }
    (GroundDatabase::propositional(n, clauses), shift)
}

/// Atom of node `i` taking label `a >= 1` in [`chain_db`].
pub fn chain_atom(model: &ChainModel<f64>, i: usize, a: usize) -> usize {
    model.unary[..i].iter().map(|u| u.len() - 1).sum::<usize>() + a - 1
}

fn chain_state(model: &ChainModel<f64>, i: usize, a: usize) -> (Vec<usize>, Vec<usize>) {
    if a == 0 {
        (vec![], (1..model.unary[i].len()).map(|b| chain_atom(model, i, b)).collect())
    } else {
        (vec![chain_atom(model, i, a)], vec![])
    }
}

/// Chain model as a ground database with one atom per non-⊥ label. The
/// shift satisfies `labeling cost = world_cost - shift`.
pub fn chain_db(model: &ChainModel<f64>) -> (GroundDatabase<f64>, f64) {
    let n: usize = model.unary.iter().map(|u| u.len() - 1).sum();
    let mut clauses = Vec::new();
    let mut shift = 0.0;
    for (i, u) in model.unary.iter().enumerate() {
        let atoms: Vec<usize> = (1..u.len()).map(|a| chain_atom(model, i, a)).collect();
        at_most_one(&atoms, &mut clauses);
        for (a, &c) in u.iter().enumerate() {
            let (on, off) = chain_state(model, i, a);
            shift += indicator(&on, &off, c, &mut clauses);
        }
    }
    for (i, p) in model.pair.iter().enumerate() {
        for (a, row) in p.iter().enumerate() {
            for (b, &c) in row.iter().enumerate() {
                let (mut on, mut off) = chain_state(model, i, a);
                let (on2, off2) = chain_state(model, i + 1, b);
                on.extend(on2);
                off.extend(off2);
                shift += indicator(&on, &off, c, &mut clauses);
            }
        }
    }
    (GroundDatabase::propositional(n, clauses), shift)
}

fn cost_value(rng: &mut ChaCha8Rng, inf_rate: f64) -> f64 {
    if rng.gen_bool(inf_rate) {
        f64::INFINITY
    } else if rng.gen_bool(0.15) {
        0.0
    } else {
        rng.gen_range(-3.0..3.0)
    }
}

/// Up to 4 objects and 3 classes; a few hard features.
pub fn random_classification(rng: &mut ChaCha8Rng) -> ClassificationInput<f64> {
    let objects = rng.gen_range(1..=4);
    let classes = rng.gen_range(1..=3);
    let features = rng.gen_range(1..=5);
    let model: Vec<f64> = (0..features)
        .map(|_| match rng.gen_range(0..20) {
            0 => f64::INFINITY,
            1 => f64::NEG_INFINITY,
            _ => rng.gen_range(-3.0..3.0),
        })
        .collect();
    let mut instance = Vec::new();
    for o in 0..objects {
        for x in 0..classes {
            for f in 0..features {
                if rng.gen_bool(0.4) {
                    instance.push((o, x, f));
                }
            }
        }
    }
    ClassificationInput { model, instance, objects, classes }
}

/// Up to 5 nodes with 1 to 3 real labels each; rare forbidden entries.
pub fn random_chain(rng: &mut ChaCha8Rng) -> ChainModel<f64> {
    let n = rng.gen_range(1..=5);
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=4)).collect();
    let unary = labels.iter().map(|&l| (0..l).map(|_| cost_value(rng, 0.05)).collect()).collect();
    let pair = (0..n - 1)
        .map(|i| (0..labels[i]).map(|_| (0..labels[i + 1]).map(|_| cost_value(rng, 0.05)).collect()).collect())
        .collect();
    ChainModel { unary, pair }
}

/// Complete graph on `n` nodes with random signs; magnitudes 1 or drawn
/// from `[1, 2]`.
pub fn random_complete_graph(rng: &mut ChaCha8Rng, n: usize, unit: bool) -> CorefGraph<f64> {
    let mut g = CorefGraph::new(n);
    for a in 0..n {
        for b in a + 1..n {
            let m = if unit { 1.0 } else { rng.gen_range(1.0..=2.0) };
            let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            g.add_weight(a, b, s * m).unwrap();
        }
    }
    g.index();
    g
}

/// Minimum disagreement cost over all partitions of the nodes.
pub fn coref_opt(g: &CorefGraph<f64>) -> f64 {
    fn rec(i: usize, labels: &mut Vec<usize>, used: usize, g: &CorefGraph<f64>, best: &mut f64) {
        if i == g.nodes {
            *best = best.min(g.disagreement_cost(labels));
            return;
        }
        for l in 0..=used {
            labels[i] = l;
            rec(i + 1, labels, used.max(l + 1), g, best);
        }
    }
    let mut best = f64::INFINITY;
    rec(0, &mut vec![0; g.nodes], 0, g, &mut best);
    best
}

/// A ground program text with 3 to 5 unary query predicates over a closed
/// domain of 3 constants (at most 15 ground atoms) and rules split into
/// 2 or 3 annotated tasks, with at most 12 ground clauses.
pub fn random_program(rng: &mut ChaCha8Rng) -> String {
    let consts = ["A", "B", "C"];
    let preds = rng.gen_range(3..=5);
    let mut text = String::from("c = {A, B, C}\n");
    for p in 0..preds {
        writeln!(text, "*q{p}(c)").unwrap();
    }
    let tasks = rng.gen_range(2..=3);
    let kinds = ["generic", "generic", "classification", "chain"];
    let task_kinds: Vec<&str> = (0..tasks).map(|_| *kinds.choose(rng).unwrap()).collect();
    let mut by_task: Vec<Vec<String>> = vec![Vec::new(); tasks];
    let mut ground_clauses = 0;
    let budget = rng.gen_range(4..=12);
    while ground_clauses < budget {
        let lifted = rng.gen_bool(0.25) && ground_clauses + 3 <= budget;
        let len = rng.gen_range(1..=3);
        let mut lits = Vec::new();
        let mut seen = Vec::new();
        for _ in 0..len {
            let p = rng.gen_range(0..preds);
            let arg = if lifted { "x" } else { consts.choose(rng).unwrap() };
            if seen.contains(&(p, arg)) {
                continue;
            }
            seen.push((p, arg));
            let neg = if rng.gen_bool(0.5) { "!" } else { "" };
            lits.push(format!("{neg}q{p}({arg})"));
        }
        let weight = if rng.gen_bool(0.15) {
            "inf".to_string()
        } else {
            let mut w: f64 = (rng.gen_range(-40..=40) as f64) / 10.0;
            if w == 0.0 {
                w = 1.5;
            }
            format!("{w}")
        };
        by_task[rng.gen_range(0..tasks)].push(format!("{weight}: {}", lits.join(" v ")));
        ground_clauses += if lifted { 3 } else { 1 };
    }
    for (t, rules) in by_task.iter().enumerate() {
        writeln!(text, "@task t{t} {}", task_kinds[t]).unwrap();
        for r in rules {
            writeln!(text, "{r}").unwrap();
        }
    }
    text
}

/// Synthetic coreference data: `n` mentions, `n / 20` organizations, 4
/// affiliations and 20 soft-similar mentions per mention; every second
/// organization is a university.
pub fn coref_workload(n: usize, seed: u64) -> Database {
    let mut rng = rng(seed);
    let k = (n / 20).max(1);
    let m: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
    let o: Vec<String> = (0..k).map(|i| format!("o{i}")).collect();
    let mut affil = Vec::new();
    let mut sim = Vec::new();
    for name in &m {
        for _ in 0..4 {
            affil.push(vec![name.as_str(), o[rng.gen_range(0..k)].as_str()]);
        }
        for _ in 0..20 {
            sim.push(vec![name.as_str(), m[rng.gen_range(0..n)].as_str()]);
        }
    }
    let univ: Vec<Vec<&str>> = o.iter().step_by(2).map(|s| vec![s.as_str()]).collect();
    let mut db = Database::new();
    db.load_strings("affil", 2, affil);
    db.load_strings("pSimSoft", 2, sim);
    db.load_strings("univ", 1, univ);
    db
}

/// Neighbourhood view of a university-affiliation coreference rule,
/// probed once for every second mention.
pub fn coref_dmo(n: usize) -> AdornedView {
    AdornedView::new(
        "DMO",
        &["x", "y"],
        "bf",
        vec![Subgoal::new("pSimSoft", &["x", "y"]), Subgoal::new("affil", &["y", "o"]), Subgoal::new("univ", &["o"])],
    )
    .unwrap()
    .with_t(n as f64 / 2.0)
}

/// Random relations `R/2`, `S/2`, `T/1`, `U/3` over constants `0..5`.
pub fn random_database(rng: &mut ChaCha8Rng) -> Database {
    use mln_core::relational::Relation;
    let mut db = Database::new();
    for (name, arity) in [("R", 2), ("S", 2), ("T", 1), ("U", 3)] {
        let n = rng.gen_range(0..=12);
        let tuples: Vec<Vec<u32>> = (0..n).map(|_| (0..arity).map(|_| rng.gen_range(0..5)).collect()).collect();
        db.insert(Relation::from_tuples(name, arity, tuples));
    }
    db
}

/// A view of 1 to 4 subgoals over [`random_database`] relations with a
/// random head, adornment and optional constraint, a random partition of
/// its body, and a binding for its bound positions.
pub fn random_triple(rng: &mut ChaCha8Rng) -> (AdornedView, Vec<Vec<usize>>, Vec<u32>) {
    use mln_core::relational::{set_partitions, VTerm};
    let rels = [("R", 2), ("S", 2), ("T", 1), ("U", 3)];
    let names = ["a", "b", "c", "d"];
    loop {
        let k = rng.gen_range(1..=4);
        let mut body = Vec::new();
        for _ in 0..k {
            let (r, arity) = rels[rng.gen_range(0..rels.len())];
            let args =
                (0..arity)
                    .map(|_| {
                        if rng.gen_bool(0.1) {
                            VTerm::Const(rng.gen_range(0..5))
                        } else {
                            VTerm::var(names[rng.gen_range(0..4)])
                        }
                    })
                    .collect();
            body.push(Subgoal { relation: r.into(), args });
        }
        let mut vars: Vec<&str> = names.iter().copied().filter(|v| body.iter().any(|s| s.vars().any(|x| x == *v))).collect();
        if vars.is_empty() {
            continue;
        }
        vars.shuffle(rng);
        let head: Vec<&str> = vars[..rng.gen_range(1..=vars.len().min(3))].to_vec();
        let adornment: String = head.iter().map(|_| if rng.gen_bool(0.4) { 'b' } else { 'f' }).collect();
        let mut view = AdornedView::new("V", &head, &adornment, body).unwrap();
        if rng.gen_bool(0.3) {
            let l = VTerm::var(vars[rng.gen_range(0..vars.len())]);
            let r = if rng.gen_bool(0.5) {
                VTerm::var(vars[rng.gen_range(0..vars.len())])
            } else {
                VTerm::Const(rng.gen_range(0..5))
            };
            view = view.with_constraint(l, r, rng.gen_bool(0.5));
        }
        let plans = set_partitions(k);
        let plan = plans[rng.gen_range(0..plans.len())].clone();
        let binding = view.bound_positions().iter().map(|_| rng.gen_range(0..5)).collect();
        return (view, plan, binding);
    }
}

const PAIR_RULES: &[&str] = &[
    "inf: r(x, x)",
    "inf: r(u, u)",
    "3: r(x, x)",
    "inf: r(x, y) => r(y, x)",
    "inf: !r(q, w) v r(w, q)",
    "2: r(x, y) => r(y, x)",
    "inf: r(x, y) => r(x, x)",
    "inf: r(x, y), r(y, z) => r(x, z)",
    "inf: r(b, c), r(a, b) => r(a, c)",
    "inf: r(x, y), r(y, z) => r(z, x)",
    "inf: r(x, y), r(x, z) => r(y, z)",
    "inf: r(x, y), r(x, z) => y = z",
    "inf: !r(A, B)",
    "inf: r(A, x)",
];

const KEY_RULES: &[&str] = &[
    "inf: k(a, l1), k(a, l2) => l1 = l2",
    "inf: k(a1, l), k(a2, l) => a1 = a2",
    "inf: k(a, l1), k(a, l2) => l1 != l2",
    "1: k(a, l1), k(a, l2) => l1 = l2",
    "inf: k(a, X)",
    "inf: k(a, l) => k(a, X)",
];

/// A program over one query relation (`r` on 3 constants, 9 atoms, or `k`
/// on 2 x 3 constants, 6 atoms) with 1 to 3 rules drawn from templates that
/// match or nearly match the structural patterns. Every atom is grounded.
pub fn random_structure_program(rng: &mut ChaCha8Rng) -> (String, &'static str) {
    let (rel, head, pool) = if rng.gen_bool(0.65) {
        ("r", "c = {A, B, C}\n*r(c, c)\n1: r(x, y)\n", PAIR_RULES)
    } else {
        ("k", "c = {A, B}\nl = {X, Y, Z}\n*k(c, l)\n1: k(x, y)\n", KEY_RULES)
    };
    let mut text = head.to_string();
    for _ in 0..rng.gen_range(1..=3) {
        writeln!(text, "{}", pool[rng.gen_range(0..pool.len())]).unwrap();
    }
    (text, rel)
}

/// Whether `prop` holds for `rel` in `world`.
pub fn property_holds(rel: &str, prop: Property, info: &RelationInfo, g: &GroundDatabase<f64>, world: &[bool]) -> bool {
    let p = g.predicate_index(rel).unwrap();
    let truth: HashMap<Vec<u32>, bool> =
        g.atoms().iter().filter(|a| a.predicate == p).map(|a| (a.args.clone(), world[a.id])).collect();
    let t = |args: &[u32]| truth[args];
    let tuples: Vec<&Vec<u32>> = truth.keys().collect();
    match prop {
        Property::Ref => tuples.iter().all(|a| a[0] != a[1] || t(a)),
        Property::Sym => tuples.iter().all(|a| !t(a) || t(&[a[1], a[0]])),
        Property::Trn => tuples.iter().all(|a| tuples.iter().all(|b| !(t(a) && t(b) && a[1] == b[0]) || t(&[a[0], b[1]]))),
        Property::Key => {
            let k = info.key.as_ref().unwrap();
            tuples.iter().all(|a| {
                tuples.iter().all(|b| !(t(a) && t(b) && k.key.iter().all(|&i| a[i] == b[i])) || a[k.value] == b[k.value])
            })
        }
        _ => true,
    }
}

/// Checks every structural property the compiler asserts for `rel` on all
/// finite-cost worlds. Returns the asserted properties.
pub fn sound_properties(text: &str, rel: &str) -> Result<BTreeSet<Property>, String> {
    let prog = parse_program::<f64>(text).map_err(|e| format!("{e}\n{text}"))?;
    let g = ground(&prog).map_err(|e| e.to_string())?;
    if g.num_atoms() > 16 {
        return Err(format!("{} atoms is too many to enumerate", g.num_atoms()));
    }
    let info = analyze_relation(&prog, rel);
    let props: BTreeSet<Property> =
        [Property::Ref, Property::Sym, Property::Trn, Property::Key].into_iter().filter(|&q| info.has(q)).collect();
    for mask in 0..(1u32 << g.num_atoms()) {
        let world: Vec<bool> = (0..g.num_atoms()).map(|a| mask >> a & 1 == 1).collect();
        if !world_cost(&g, &world).is_finite() {
            continue;
        }
        for &q in &props {
            if !property_holds(rel, q, &info, &g, &world) {
                return Err(format!("{q} asserted but violated\n{text}"));
            }
        }
    }
    Ok(props)
}
