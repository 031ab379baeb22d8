use std::collections::{BTreeSet, HashSet};

use super::cost::MaterializationPlan;
use super::relation::{Database, Relation};
use super::view::{AdornedView, VTerm};
use crate::error::{Error, Result};
use crate::logic::Sym;

#[derive(Clone, Copy, Debug)]
enum Slot {
    Var(usize),
    Const(Sym),
}

struct JoinAtom<'a> {
    rel: &'a Relation,
    args: Vec<Slot>,
}

struct Join<'a> {
    atoms: Vec<JoinAtom<'a>>,
    /// (lhs, rhs, equal)
    constraints: Vec<(Slot, Slot, bool)>,
    nvars: usize,
}

/// A join step: which atom, which of its columns are bound on entry, and
/// which constraints become checkable after it.
struct Step {
    atom: usize,
    bound_cols: Vec<usize>,
    checks: Vec<usize>,
}

fn resolve(s: Slot, b: &[Option<Sym>]) -> Option<Sym> {
    match s {
        Slot::Var(v) => b[v],
        Slot::Const(c) => Some(c),
    }
}

impl<'a> Join<'a> {
    /// Greedy index-nested-loop order: repeatedly take the atom with the
    /// fewest expected matches given the variables bound so far.
    fn order(&self, initially_bound: &[bool]) -> Vec<Step> {
        let mut bound = initially_bound.to_vec();
        let mut remaining: Vec<usize> = (0..self.atoms.len()).collect();
        let mut steps = Vec::new();
        let mut checked = vec![false; self.constraints.len()];
        let is_bound = |s: &Slot, bound: &[bool]| match s {
            Slot::Var(v) => bound[*v],
            Slot::Const(_) => true,
        };
        // constraints over constants or initially bound variables
        let pre: Vec<usize> = (0..self.constraints.len())
            .filter(|&i| is_bound(&self.constraints[i].0, &bound) && is_bound(&self.constraints[i].1, &bound))
            .collect();
        for &i in &pre {
            checked[i] = true;
        }
        if !pre.is_empty() {
            steps.push(Step { atom: usize::MAX, bound_cols: Vec::new(), checks: pre });
        }
        while !remaining.is_empty() {
            let score = |a: &JoinAtom| {
                let st = a.rel.stats();
                let mut s = st.cardinality as f64;
                for (c, slot) in a.args.iter().enumerate() {
                    if is_bound(slot, &bound) {
                        s /= (st.distinct[c] as f64).max(1.0);
                    }
                }
                s
            };
            let (pos, _) = remaining
                .iter()
                .enumerate()
                .map(|(p, &i)| (p, score(&self.atoms[i])))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            let ai = remaining.remove(pos);
            let atom = &self.atoms[ai];
            let bound_cols: Vec<usize> = (0..atom.args.len()).filter(|&c| is_bound(&atom.args[c], &bound)).collect();
            for s in &atom.args {
                if let Slot::Var(v) = s {
                    bound[*v] = true;
                }
            }
            let checks: Vec<usize> = (0..self.constraints.len())
                .filter(|&i| !checked[i] && is_bound(&self.constraints[i].0, &bound) && is_bound(&self.constraints[i].1, &bound))
                .collect();
            for &i in &checks {
                checked[i] = true;
            }
            steps.push(Step { atom: ai, bound_cols, checks });
        }
        steps
    }

    fn run(&self, init: Vec<Option<Sym>>, emit: &mut dyn FnMut(&[Option<Sym>])) {
        let initially: Vec<bool> = init.iter().map(Option::is_some).collect();
        let steps = self.order(&initially);
        let mut binding = init;
        self.step(&steps, 0, &mut binding, emit);
    }

    fn checks_pass(&self, checks: &[usize], b: &[Option<Sym>]) -> bool {
        checks.iter().all(|&i| {
            let (l, r, eq) = self.constraints[i];
            (resolve(l, b) == resolve(r, b)) == eq
        })
    }

    fn step(&self, steps: &[Step], k: usize, b: &mut Vec<Option<Sym>>, emit: &mut dyn FnMut(&[Option<Sym>])) {
        if k == steps.len() {
            emit(b);
            return;
        }
        let st = &steps[k];
        if st.atom == usize::MAX {
            if self.checks_pass(&st.checks, b) {
                self.step(steps, k + 1, b, emit);
            }
            return;
        }
        let atom = &self.atoms[st.atom];
        let vals: Vec<Sym> = st.bound_cols.iter().map(|&c| resolve(atom.args[c], b).expect("bound")).collect();
        let mut newly: Vec<usize> = Vec::with_capacity(atom.args.len());
        atom.rel.probe(&st.bound_cols, &vals, |t| {
            let mut ok = true;
            for (c, s) in atom.args.iter().enumerate() {
                if let Slot::Var(v) = *s {
                    match b[v] {
                        Some(x) if x != t[c] => {
                            ok = false;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            b[v] = Some(t[c]);
                            newly.push(v);
                        }
                    }
                }
            }
            if ok && self.checks_pass(&st.checks, b) {
                self.step(steps, k + 1, b, emit);
            }
            for v in newly.drain(..) {
                b[v] = None;
            }
        });
    }
}

struct VarTable {
    names: Vec<String>,
}

impl VarTable {
    fn of(view: &AdornedView) -> Self {
        VarTable { names: view.variables() }
    }

    fn id(&self, v: &str) -> Result<usize> {
        self.names.iter().position(|n| n == v).ok_or_else(|| Error::UnboundHeadVariable(v.to_string()))
    }

    fn slot(&self, t: &VTerm) -> Result<Slot> {
        Ok(match t {
            VTerm::Var(v) => Slot::Var(self.id(v)?),
            VTerm::Const(c) => Slot::Const(*c),
        })
    }
}

fn constraint_slots(view: &AdornedView, vars: &VarTable, filter: impl Fn(&[Slot]) -> bool) -> Result<Vec<(Slot, Slot, bool)>> {
    let mut out = Vec::new();
    for c in &view.constraints {
        let (l, r) = (vars.slot(&c.lhs)?, vars.slot(&c.rhs)?);
        if filter(&[l, r]) {
            out.push((l, r, c.equal));
        }
    }
    Ok(out)
}

/// Full answer of the view with every head position free: sorted, distinct.
pub fn eval_eager(view: &AdornedView, db: &Database) -> Result<Relation> {
    view.validate()?;
    let vars = VarTable::of(view);
    let atoms = view
        .body
        .iter()
        .map(|s| Ok(JoinAtom { rel: db.get(&s.relation)?, args: s.args.iter().map(|a| vars.slot(a)).collect::<Result<_>>()? }))
        .collect::<Result<Vec<_>>>()?;
    let join = Join { atoms, constraints: constraint_slots(view, &vars, |_| true)?, nvars: vars.names.len() };
    let head: Vec<usize> = view.head.iter().map(|h| vars.id(h)).collect::<Result<_>>()?;
    let mut out: HashSet<Vec<Sym>> = HashSet::new();
    join.run(vec![None; join.nvars], &mut |b| {
        out.insert(head.iter().map(|&v| b[v].expect("head bound")).collect());
    });
    Ok(Relation::from_tuples(view.name.clone(), view.head.len(), out))
}

/// A view whose plan blocks have been materialized and can be probed with
/// bindings for its bound head positions.
pub struct MaterializedView<'a> {
    view: AdornedView,
    vars: VarTable,
    db: &'a Database,
    /// Per block: either the base relation of a singleton block or a
    /// materialized relation over the block head.
    blocks: Vec<BlockData>,
    constraints: Vec<(Slot, Slot, bool)>,
    bound: Vec<usize>,
    free: Vec<usize>,
}

enum BlockData {
    Base { subgoal: usize },
    Materialized { rel: Relation, args: Vec<Slot> },
}

impl<'a> MaterializedView<'a> {
    pub fn new(view: &AdornedView, plan: &MaterializationPlan, db: &'a Database) -> Result<Self> {
        view.validate()?;
        let vars = VarTable::of(view);
        let mut covered = vec![false; view.body.len()];
        for b in &plan.blocks {
            for &i in b {
                if i >= covered.len() || covered[i] {
                    return Err(Error::Model("plan blocks must partition the view body".into()));
                }
                covered[i] = true;
            }
        }
        if covered.iter().any(|c| !c) {
            return Err(Error::Model("plan blocks must partition the view body".into()));
        }
        let mut blocks = Vec::with_capacity(plan.blocks.len());
        for (j, b) in plan.blocks.iter().enumerate() {
            if b.len() == 1 {
                db.get(&view.body[b[0]].relation)?;
                blocks.push(BlockData::Base { subgoal: b[0] });
                continue;
            }
            let head = super::cost::block_head(view, &plan.blocks, j);
            let inside: BTreeSet<usize> =
                b.iter().flat_map(|&i| view.body[i].vars()).map(|v| vars.id(v)).collect::<Result<_>>()?;
            let atoms = b
                .iter()
                .map(|&i| {
                    let s = &view.body[i];
                    Ok(JoinAtom { rel: db.get(&s.relation)?, args: s.args.iter().map(|a| vars.slot(a)).collect::<Result<_>>()? })
                })
                .collect::<Result<Vec<_>>>()?;
            let local = constraint_slots(view, &vars, |slots| {
                slots.iter().all(|s| match s {
                    Slot::Var(v) => inside.contains(v),
                    Slot::Const(_) => true,
                })
            })?;
            let join = Join { atoms, constraints: local, nvars: vars.names.len() };
            let head_ids: Vec<usize> = head.iter().map(|h| vars.id(h)).collect::<Result<_>>()?;
            let mut out: HashSet<Vec<Sym>> = HashSet::new();
            join.run(vec![None; join.nvars], &mut |bd| {
                out.insert(head_ids.iter().map(|&v| bd[v].expect("bound")).collect());
            });
            let rel = Relation::from_tuples(format!("{}_q{j}", view.name), head.len(), out);
            blocks.push(BlockData::Materialized { rel, args: head_ids.into_iter().map(Slot::Var).collect() });
        }
        let constraints = constraint_slots(view, &vars, |_| true)?;
        Ok(MaterializedView {
            bound: view.bound_positions(),
            free: view.free_positions(),
            view: view.clone(),
            vars,
            db,
            blocks,
            constraints,
        })
    }

    pub fn view(&self) -> &AdornedView {
        &self.view
    }

    /// Total number of tuples held by materialized blocks.
    pub fn materialized_size(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b {
                BlockData::Base { .. } => 0,
                BlockData::Materialized { rel, .. } => rel.len(),
            })
            .sum()
    }

    /// Distinct tuples over the free head positions for one binding of the
    /// bound positions, sorted.
    pub fn eval_bound(&self, binding: &[Sym]) -> Result<Vec<Vec<Sym>>> {
        if binding.len() != self.bound.len() {
            return Err(Error::BindingArity { expected: self.bound.len(), got: binding.len() });
        }
        let mut init = vec![None; self.vars.names.len()];
        for (&pos, &val) in self.bound.iter().zip(binding) {
            let v = self.vars.id(&self.view.head[pos])?;
            match init[v] {
                Some(x) if x != val => return Ok(Vec::new()),
                _ => init[v] = Some(val),
            }
        }
        let atoms: Vec<JoinAtom> = self
            .blocks
            .iter()
            .map(|b| match b {
                BlockData::Base { subgoal } => {
                    let s = &self.view.body[*subgoal];
                    JoinAtom {
                        rel: self.db.get(&s.relation).expect("checked at construction"),
                        args: s.args.iter().map(|a| self.vars.slot(a).expect("known variable")).collect(),
                    }
                }
                BlockData::Materialized { rel, args } => JoinAtom { rel, args: args.clone() },
            })
            .collect();
        let join = Join { atoms, constraints: self.constraints.clone(), nvars: self.vars.names.len() };
        let free: Vec<usize> = self.free.iter().map(|&p| self.vars.id(&self.view.head[p])).collect::<Result<_>>()?;
        let mut out: HashSet<Vec<Sym>> = HashSet::new();
        join.run(init, &mut |b| {
            out.insert(free.iter().map(|&v| b[v].expect("bound")).collect());
        });
        let mut v: Vec<Vec<Sym>> = out.into_iter().collect();
        v.sort_unstable();
        Ok(v)
    }
}

/// Reference evaluation by enumerating every combination of body tuples.
pub fn nested_loop_oracle(view: &AdornedView, db: &Database) -> Result<Vec<Vec<Sym>>> {
    let vars = VarTable::of(view);
    let rels: Vec<&Relation> = view.body.iter().map(|s| db.get(&s.relation)).collect::<Result<_>>()?;
    let mut out = BTreeSet::new();
    let mut idx = vec![0usize; rels.len()];
    if rels.iter().any(|r| r.is_empty()) {
        return Ok(Vec::new());
    }
    'outer: loop {
        let mut b: Vec<Option<Sym>> = vec![None; vars.names.len()];
        let mut ok = true;
        'check: for (k, s) in view.body.iter().enumerate() {
            let t = &rels[k].tuples()[idx[k]];
            for (c, a) in s.args.iter().enumerate() {
                match a {
                    VTerm::Const(x) if *x != t[c] => {
                        ok = false;
                        break 'check;
                    }
                    VTerm::Const(_) => {}
                    VTerm::Var(v) => {
                        let id = vars.id(v)?;
                        match b[id] {
                            Some(x) if x != t[c] => {
                                ok = false;
                                break 'check;
                            }
                            _ => b[id] = Some(t[c]),
                        }
                    }
                }
            }
        }
        if ok {
            for c in &view.constraints {
                let l = resolve(vars.slot(&c.lhs)?, &b);
                let r = resolve(vars.slot(&c.rhs)?, &b);
                if (l == r) != c.equal {
                    ok = false;
                }
            }
        }
        if ok {
            out.insert(view.head.iter().map(|h| b[vars.id(h).unwrap()].unwrap()).collect::<Vec<_>>());
        }
        for k in (0..rels.len()).rev() {
            idx[k] += 1;
            if idx[k] < rels[k].len() {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    Ok(out.into_iter().collect())
}

/// Oracle answer for one binding: filter the full answer.
pub fn filter_binding(view: &AdornedView, full: &[Vec<Sym>], binding: &[Sym]) -> Vec<Vec<Sym>> {
    let bound = view.bound_positions();
    let free = view.free_positions();
    let mut out: Vec<Vec<Sym>> = full
        .iter()
        .filter(|t| bound.iter().zip(binding).all(|(&p, &v)| t[p] == v))
        .map(|t| free.iter().map(|&p| t[p]).collect())
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}
