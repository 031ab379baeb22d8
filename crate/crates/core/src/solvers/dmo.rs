use std::collections::HashMap;

use super::coref::NeighborOracle;
use crate::compiler::{LogicalPlan, Property, Task, TaskKind};
use crate::logic::{Clause, GroundDatabase, Sym, Term};
use crate::parser::MlnProgram;
use crate::relational::{estimate_block, AdornedView, Database, MaterializedView, Relation, Subgoal, VTerm};
use crate::scalar::Scalar;

/// Engine relations for a program: true evidence tuples for evidence
/// predicates and every grounded candidate tuple for query predicates.
pub fn engine_database<T: Scalar>(program: &MlnProgram<T>, db: &GroundDatabase<T>) -> Database {
    let mut engine = Database::new();
    let mut rows: HashMap<&str, Vec<Vec<&str>>> = HashMap::new();
    for ev in program.evidence.iter().filter(|e| e.truth) {
        rows.entry(&ev.predicate).or_default().push(ev.args.iter().map(String::as_str).collect());
    }
    for a in db.atoms() {
        let name = db.predicates[a.predicate].name.as_str();
        rows.entry(name).or_default().push(a.args.iter().map(|&s| db.symbols.name(s)).collect());
    }
    for s in &program.schemas {
        let r = rows.remove(s.name.as_str()).unwrap_or_default();
        engine.insert(Relation::new(s.name.clone(), s.arity()));
        engine.load_strings(&s.name, s.arity(), r);
    }
    engine
}

fn vterm(t: &Term, engine: &Database) -> VTerm {
    match t {
        Term::Var(v) => VTerm::Var(v.clone()),
        Term::Const(c) => VTerm::Const(engine.symbols.get(c).unwrap_or(Sym::MAX)),
    }
}

/// Antecedent atoms of `clause` as subgoals, optionally leaving out one
/// predicate, with the clause's equality disjuncts negated into filters.
fn body_view<T: Scalar>(
    name: &str,
    clause: &Clause<T>,
    keep: impl Fn(&str) -> bool,
    head: &[String],
    adornment: &str,
    engine: &Database,
) -> Option<AdornedView> {
    let body: Vec<Subgoal> = clause
        .literals
        .iter()
        .filter(|l| !l.in_head && !l.positive && keep(&l.atom.predicate))
        .map(|l| Subgoal { relation: l.atom.predicate.clone(), args: l.atom.args.iter().map(|a| vterm(a, engine)).collect() })
        .collect();
    if body.is_empty() {
        return None;
    }
    let heads: Vec<&str> = head.iter().map(String::as_str).collect();
    let mut view = AdornedView::new(name, &heads, adornment, body).ok()?;
    for c in &clause.constraints {
        let filter = c.negated();
        let (l, r) = (vterm(&filter.lhs, engine), vterm(&filter.rhs, engine));
        let bound = |t: &VTerm| match t {
            VTerm::Var(v) => view.body.iter().any(|s| s.vars().any(|x| x == v)),
            VTerm::Const(_) => true,
        };
        if bound(&l) && bound(&r) {
            view = view.with_constraint(l, r, filter.equal);
        }
    }
    Some(view)
}

fn body_vars<T: Scalar>(clause: &Clause<T>, is_evidence: &impl Fn(&str) -> bool) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for l in clause.literals.iter().filter(|l| !l.in_head && !l.positive && is_evidence(&l.atom.predicate)) {
        for v in l.atom.vars() {
            if !out.iter().any(|o| o == v) {
                out.push(v.to_string());
            }
        }
    }
    out
}

/// Data movement views a task's solver reads, each with its access count
/// `t`. Every rule contributes an all-free grounding view over its evidence
/// antecedents. Classification adds per-rule feature views bound on the
/// object; clustering adds the bound-free neighbourhood view of each rule
/// defining the relation.
pub fn register_dmos<T: Scalar>(program: &MlnProgram<T>, plan: &LogicalPlan, task: &Task, engine: &Database) -> Vec<AdornedView> {
    let is_evidence = |p: &str| program.schema(p).is_some_and(|s| !s.is_query());
    let mut views = Vec::new();
    for &ri in &task.rules {
        let rule = &program.rules[ri];
        let Some(clause) = rule.clauses.first() else { continue };
        let vars = body_vars(clause, &is_evidence);
        let adorn = "f".repeat(vars.len());
        if let Some(v) = body_view(&format!("ground_r{}", ri + 1), clause, is_evidence, &vars, &adorn, engine) {
            views.push(v);
        }
        for owned in &task.owned {
            let Some(head) = clause.literals.iter().find(|l| l.in_head && l.atom.predicate == *owned) else { continue };
            let info = plan.relation(owned);
            let structural = info.is_some_and(|i| i.structural_rules.contains(&ri));
            match task.kind {
                TaskKind::SimpleClassification if !structural => {
                    let mut head_vars: Vec<String> =
                        head.atom.vars().filter(|v| vars.iter().any(|x| x == v)).map(String::from).collect();
                    head_vars.dedup();
                    let bound = head_vars.len();
                    for v in &vars {
                        if !head_vars.contains(v) {
                            head_vars.push(v.clone());
                        }
                    }
                    let adorn = "b".repeat(bound) + &"f".repeat(head_vars.len() - bound);
                    let objects = engine.get(owned).map(|r| r.len()).unwrap_or(0).max(1);
                    if let Some(v) = body_view(&format!("I_r{}", ri + 1), clause, is_evidence, &head_vars, &adorn, engine) {
                        views.push(v.with_t(objects as f64));
                    }
                }
                TaskKind::Coref
                    if !structural
                        && info.is_some_and(|i| i.has(Property::Ref) && i.has(Property::Sym) && i.has(Property::Trn)) =>
                {
                    let hv: Vec<String> = head.atom.vars().map(String::from).collect();
                    if hv.len() != 2 || hv[0] == hv[1] {
                        continue;
                    }
                    let name = owned.clone();
                    if let Some(v) = body_view(&format!("DMO_r{}", ri + 1), clause, |p| p != name, &hv, "bf", engine) {
                        let t = neighbourhood_accesses(&v, program, owned, engine);
                        views.push(v.with_t(t));
                    }
                }
                _ => {}
            }
        }
    }
    views
}

/// Node count divided by the estimated average positive degree.
fn neighbourhood_accesses<T: Scalar>(view: &AdornedView, program: &MlnProgram<T>, rel: &str, engine: &Database) -> f64 {
    let n = program.schema(rel).and_then(|s| program.domains.get(&s.domains[0])).map(|d| d.constants.len()).unwrap_or(1).max(1)
        as f64;
    let all: Vec<usize> = (0..view.body.len()).collect();
    let edges = estimate_block(view, engine, &all, &view.head).map(|e| e.card).unwrap_or(n);
    let degree = (edges / n).max(1.0);
    n / degree
}

/// Neighbour oracle answering bound probes of a `bf` view.
pub struct ViewOracle<'a> {
    view: MaterializedView<'a>,
    nodes: Vec<Sym>,
    index: HashMap<Sym, usize>,
}

impl<'a> ViewOracle<'a> {
    /// `nodes[i]` is the constant standing for graph node `i`.
    pub fn new(view: MaterializedView<'a>, nodes: Vec<Sym>) -> Self {
        let index = nodes.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        ViewOracle { view, nodes, index }
    }
}

impl NeighborOracle for ViewOracle<'_> {
    fn neighbors(&self, node: usize, out: &mut Vec<usize>) {
        let rows = self.view.eval_bound(&[self.nodes[node]]).expect("view takes one bound argument");
        out.extend(rows.iter().filter_map(|r| self.index.get(&r[0]).copied()).filter(|&m| m != node));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::assign_tasks;
    use crate::logic::ground;
    use crate::parser::parse_with_evidence;

    #[test]
    fn affiliation_views() {
        let p = parse_with_evidence::<f64>(
            include_str!("../../tests/fixtures/affiliation.mln"),
            include_str!("../../tests/fixtures/affiliation.db"),
        )
        .unwrap();
        let g = ground(&p).unwrap();
        let plan = assign_tasks(&p);
        let engine = engine_database(&p, &g);
        let coref = plan.tasks.iter().find(|t| t.kind == TaskKind::Coref).unwrap();
        let views = register_dmos(&p, &plan, coref, &engine);
        let dmo = views.iter().find(|v| v.name == "DMO_r5").expect("neighbourhood view of the soft rule");
        assert_eq!(dmo.adornment_string(), "bf");
        let rels: Vec<&str> = dmo.body.iter().map(|s| s.relation.as_str()).collect();
        assert_eq!(rels, vec!["affil", "affil", "pSimSoft"]);
        assert!(dmo.t > 0.0);

        let affil = plan.tasks.iter().find(|t| t.kind == TaskKind::SimpleClassification).unwrap();
        let views = register_dmos(&p, &plan, affil, &engine);
        let feat = views.iter().find(|v| v.name == "I_r7").unwrap();
        assert_eq!(feat.adornment_string(), "bbf");
        assert_eq!(feat.head, vec!["p", "o", "d"]);
    }
}
