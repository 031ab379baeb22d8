use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

use super::relation::Database;
use super::view::{AdornedView, VTerm};
use crate::error::Result;

/// Largest subgoal count for which every partition is scored.
pub const MAX_ENUMERATED_SUBGOALS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModelParams {
    /// Cost of one page fetch.
    pub alpha_io: f64,
    /// Discount for probes into blocks that fit in memory, in (0, 1].
    pub beta: f64,
    /// Block size (tuples) under which `beta` applies.
    pub buffer_threshold: f64,
    /// Cost of writing one materialized tuple.
    pub write_cost: f64,
}

impl Default for CostModelParams {
    fn default() -> Self {
        CostModelParams { alpha_io: 1.0, beta: 0.1, buffer_threshold: 1e6, write_cost: 1.0 }
    }
}

/// Estimated size of a (projected) conjunctive block.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// Join size before projection.
    pub join_card: f64,
    /// Size after projecting onto the block head.
    pub card: f64,
    pub distinct: HashMap<String, f64>,
}

impl Estimate {
    /// Expected number of rows matching one binding of `bound`.
    pub fn selection(&self, bound: &BTreeSet<String>) -> f64 {
        let mut s = self.card;
        for (v, d) in &self.distinct {
            if bound.contains(v) {
                s /= d.max(1.0);
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    pub mat: Vec<f64>,
    pub inc: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterializationPlan {
    /// Disjoint, sorted subgoal index sets covering the body.
    pub blocks: Vec<Vec<usize>>,
    /// Head variables of each block query.
    pub heads: Vec<Vec<String>>,
    pub cost: CostBreakdown,
}

impl MaterializationPlan {
    pub fn is_eager(&self) -> bool {
        self.blocks.len() == 1
    }

    pub fn is_lazy(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 1)
    }
}

/// Variables of `block` that must be visible outside it: view head
/// variables, variables shared with other blocks, and variables of
/// constraints that are not local to the block.
pub fn block_head(view: &AdornedView, blocks: &[Vec<usize>], j: usize) -> Vec<String> {
    let inside: BTreeSet<&str> = blocks[j].iter().flat_map(|&i| view.body[i].vars()).collect();
    let outside: BTreeSet<&str> = blocks
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != j)
        .flat_map(|(_, b)| b.iter().flat_map(|&i| view.body[i].vars()))
        .collect();
    let mut needed: BTreeSet<&str> = view.head.iter().map(String::as_str).collect();
    needed.extend(outside);
    for c in &view.constraints {
        let vars: Vec<&str> =
            [&c.lhs, &c.rhs].into_iter().filter_map(|t| if let VTerm::Var(v) = t { Some(v.as_str()) } else { None }).collect();
        if !vars.iter().all(|v| inside.contains(v)) {
            needed.extend(vars);
        }
    }
    view.variables().into_iter().filter(|v| inside.contains(v.as_str()) && needed.contains(v.as_str())).collect()
}

/// System-R style estimate: independent attributes, uniform values,
/// join selectivity from distinct counts.
pub fn estimate_block(view: &AdornedView, db: &Database, block: &[usize], head: &[String]) -> Result<Estimate> {
    let mut card = 1.0;
    let mut occurrences: HashMap<&str, Vec<f64>> = HashMap::new();
    for &i in block {
        let sg = &view.body[i];
        let rel = db.get(&sg.relation)?;
        let stats = rel.stats();
        card *= stats.cardinality as f64;
        for (c, a) in sg.args.iter().enumerate() {
            let d = (stats.distinct[c] as f64).max(1.0);
            match a {
                VTerm::Const(_) => card /= d,
                VTerm::Var(v) => occurrences.entry(v.as_str()).or_default().push(d),
            }
        }
    }
    let mut distinct: HashMap<String, f64> = HashMap::new();
    for (v, ds) in &occurrences {
        let min = ds.iter().copied().fold(f64::INFINITY, f64::min);
        let prod: f64 = ds.iter().product();
        card /= prod / min;
        distinct.insert(v.to_string(), min);
    }
    for c in &view.constraints {
        let d = |t: &VTerm| match t {
            VTerm::Var(v) => distinct.get(v).copied(),
            VTerm::Const(_) => Some(1.0),
        };
        if let (Some(a), Some(b)) = (d(&c.lhs), d(&c.rhs)) {
            if c.equal {
                card /= a.max(b).max(1.0);
            }
        }
    }
    let join_card = card;
    let mut proj = join_card;
    let bound: f64 = head.iter().map(|h| distinct.get(h).copied().unwrap_or(1.0)).product();
    proj = proj.min(bound);
    let distinct = head.iter().map(|h| (h.clone(), distinct.get(h).copied().unwrap_or(1.0).min(proj.max(1.0)))).collect();
    Ok(Estimate { join_card, card: proj, distinct })
}

/// Cost of materializing a block: join work plus writing its output.
/// Single-subgoal blocks are read in place, so [`exec_cost`] charges them
/// only the scan that builds their index.
pub fn estimate_mat(est: &Estimate, params: &CostModelParams) -> f64 {
    est.join_card * params.alpha_io + est.card * params.write_cost
}

/// One index-nested-loop step: `n_prev` input rows, each doing one index
/// access into a block of `q_size` tuples, producing `n` rows in total.
pub fn inc_step(n_prev: f64, n: f64, q_size: f64, params: &CostModelParams) -> f64 {
    if n_prev <= 0.0 {
        return 0.0;
    }
    let c = params.alpha_io * n_prev * ((n / n_prev).ceil() + q_size.max(1.0).log2());
    if q_size < params.buffer_threshold {
        c * params.beta
    } else {
        c
    }
}

/// Per-probe cost of the view rewritten over `blocks`, probing blocks in
/// order of increasing estimated selection size.
pub fn estimate_inc(view: &AdornedView, db: &Database, blocks: &[Vec<usize>], params: &CostModelParams) -> Result<f64> {
    let heads: Vec<Vec<String>> = (0..blocks.len()).map(|j| block_head(view, blocks, j)).collect();
    let ests: Vec<Estimate> = blocks.iter().zip(&heads).map(|(b, h)| estimate_block(view, db, b, h)).collect::<Result<_>>()?;
    Ok(inc_from_estimates(view, &ests, params))
}

fn inc_from_estimates(view: &AdornedView, ests: &[Estimate], params: &CostModelParams) -> f64 {
    let mut bound: BTreeSet<String> = view.bound_positions().into_iter().map(|i| view.head[i].clone()).collect();
    let mut remaining: Vec<usize> = (0..ests.len()).collect();
    let (mut n_prev, mut total) = (1.0, 0.0);
    while !remaining.is_empty() {
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .map(|(p, &j)| (p, ests[j].selection(&bound)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        let j = remaining.remove(pos);
        let n = n_prev * ests[j].selection(&bound);
        total += inc_step(n_prev, n, ests[j].card, params);
        n_prev = n;
        bound.extend(ests[j].distinct.keys().cloned());
    }
    total
}

pub fn exec_cost(view: &AdornedView, db: &Database, blocks: &[Vec<usize>], params: &CostModelParams) -> Result<CostBreakdown> {
    let heads: Vec<Vec<String>> = (0..blocks.len()).map(|j| block_head(view, blocks, j)).collect();
    let ests: Vec<Estimate> = blocks.iter().zip(&heads).map(|(b, h)| estimate_block(view, db, b, h)).collect::<Result<_>>()?;
    let mat: Vec<f64> = ests
        .iter()
        .zip(blocks)
        .map(|(e, b)| if b.len() == 1 { e.join_card * params.alpha_io } else { estimate_mat(e, params) })
        .collect();
    let inc = inc_from_estimates(view, &ests, params);
    let total = view.t * inc + mat.iter().sum::<f64>();
    Ok(CostBreakdown { mat, inc, total })
}

pub fn plan_for(
    view: &AdornedView,
    db: &Database,
    blocks: Vec<Vec<usize>>,
    params: &CostModelParams,
) -> Result<MaterializationPlan> {
    let cost = exec_cost(view, db, &blocks, params)?;
    let heads = (0..blocks.len()).map(|j| block_head(view, &blocks, j)).collect();
    Ok(MaterializationPlan { blocks, heads, cost })
}

pub fn eager_blocks(k: usize) -> Vec<Vec<usize>> {
    vec![(0..k).collect()]
}

pub fn lazy_blocks(k: usize) -> Vec<Vec<usize>> {
    (0..k).map(|i| vec![i]).collect()
}

/// All set partitions of `0..k`, blocks ordered by smallest element.
pub fn set_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, k: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == k {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, k, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        rec(i + 1, k, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    if k > 0 {
        rec(0, k, &mut Vec::new(), &mut out);
    }
    out
}

fn better(a: &MaterializationPlan, b: &MaterializationPlan) -> bool {
    let (x, y) = (a.cost.total, b.cost.total);
    let tol = 1e-9 * x.abs().max(y.abs()).max(1.0);
    if (x - y).abs() > tol {
        return x < y;
    }
    (a.blocks.len(), &a.blocks) < (b.blocks.len(), &b.blocks)
}

/// Minimum-ExecCost partition of the view's subgoals. Views with more
/// than [`MAX_ENUMERATED_SUBGOALS`] subgoals only compare fully eager and
/// fully lazy evaluation.
pub fn choose_plan(view: &AdornedView, db: &Database, params: &CostModelParams) -> Result<MaterializationPlan> {
    let k = view.body.len();
    let candidates = if k <= MAX_ENUMERATED_SUBGOALS { set_partitions(k) } else { vec![eager_blocks(k), lazy_blocks(k)] };
    let mut best: Option<MaterializationPlan> = None;
    for blocks in candidates {
        let p = plan_for(view, db, blocks, params)?;
        if best.as_ref().is_none_or(|b| better(&p, b)) {
            best = Some(p);
        }
    }
    Ok(best.unwrap_or(MaterializationPlan {
        blocks: Vec::new(),
        heads: Vec::new(),
        cost: CostBreakdown { mat: Vec::new(), inc: 0.0, total: 0.0 },
    }))
}

/// Text report of a view and its plan.
pub fn explain_plan(view: &AdornedView, plan: &MaterializationPlan) -> String {
    let mut out = String::new();
    writeln!(out, "dmo {view}").unwrap();
    writeln!(out, "  adornment {}  t = {:.3}", view.adornment_string(), view.t).unwrap();
    let kind = if plan.is_eager() {
        "eager"
    } else if plan.is_lazy() {
        "lazy"
    } else {
        "partial"
    };
    writeln!(out, "  plan {kind}").unwrap();
    for (j, b) in plan.blocks.iter().enumerate() {
        let goals: Vec<&str> = b.iter().map(|&i| view.body[i].relation.as_str()).collect();
        writeln!(out, "    Q{j}({}) <- {}  mat = {:.3}", plan.heads[j].join(", "), goals.join(", "), plan.cost.mat[j]).unwrap();
    }
    writeln!(out, "  inc = {:.3}  exec = {:.3}", plan.cost.inc, plan.cost.total).unwrap();
    out
}
