//! Dual decomposition: tasks solve their own views of the ground program,
//! shared atoms get one copy per task, and Lagrange multipliers on the
//! copies are moved by subgradient steps until the copies agree.

mod decomposition;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use crate::compiler::LogicalPlan;
use crate::error::{Error, Result};
use crate::logic::{world_cost, GroundDatabase, World};
use crate::scalar::Scalar;
use crate::solvers::{mix_seed, solve_task, Mode, SolverConfig, SolverResult, SubProblem};

pub use crate::solvers::partition_task;
pub use decomposition::{
    update_multipliers, update_shared, Decomposition, MultiplierStore, SharedVariableRegistry, StepSchedule, TaskView,
};

#[derive(Debug, Clone, PartialEq)]
pub struct MasterConfig<T> {
    pub max_iters: usize,
    pub schedule: StepSchedule<T>,
    /// Stop once at most this fraction of shared atoms disagree.
    pub disagreement_threshold: T,
    /// Marginal copies within this distance count as agreeing.
    pub marginal_tolerance: T,
    pub seed: u64,
    /// Concurrent task solves.
    pub workers: usize,
    pub solver: SolverConfig,
}

impl<T: Scalar> Default for MasterConfig<T> {
    fn default() -> Self {
        MasterConfig {
            max_iters: 100,
            schedule: StepSchedule::default(),
            disagreement_threshold: T::of(0.01),
            marginal_tolerance: T::of(0.01),
            seed: 0,
            workers: 1,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// No atom is held by two tasks; one round suffices.
    NothingShared,
    Agreement,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats<T> {
    pub k: usize,
    pub alpha: T,
    pub rmse: T,
    pub disagreement: T,
    /// Best full-world cost found so far (MAP only).
    pub best_primal: Option<T>,
    /// Sum of the task optima plus the evidence constant: a lower bound on
    /// the optimum when every task was solved exactly (MAP only).
    pub dual: Option<T>,
    /// Largest `|sum_j λ[p][j]|` after this round's updates.
    pub multiplier_drift: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStats<T> {
    pub iterations: Vec<IterationStats<T>>,
    pub stop: StopReason,
    pub solver_calls: usize,
    /// Per-relation multiplier updates applied.
    pub updates: usize,
}

impl<T: Scalar> ConvergenceStats<T> {
    pub fn final_rmse(&self) -> T {
        self.iterations.last().map(|s| s.rmse).unwrap_or(T::zero())
    }

    /// TSV with one row per iteration: k, alpha, rmse, disagreement and best
    /// primal cost (empty in marginal mode).
    pub fn write_trace(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "k\talpha\trmse\tdisagreement\tbest_primal")?;
        for s in &self.iterations {
            let primal = s.best_primal.map(|c| c.to_string()).unwrap_or_default();
            writeln!(out, "{}\t{}\t{}\t{}\t{}", s.k, s.alpha, s.rmse, s.disagreement, primal)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MapOutcome<T> {
    pub world: World,
    pub cost: T,
    /// The copies agreed, every task was solved exactly and the agreed world
    /// satisfies the hard clauses, so `world` is optimal.
    pub certified: bool,
    pub stats: ConvergenceStats<T>,
    pub multipliers: MultiplierStore<T>,
    pub registry: SharedVariableRegistry<T>,
}

#[derive(Debug, Clone)]
pub struct MarginalOutcome<T> {
    /// `Pr[true]` per ground atom.
    pub marginals: Vec<T>,
    pub stats: ConvergenceStats<T>,
    pub multipliers: MultiplierStore<T>,
    pub registry: SharedVariableRegistry<T>,
}

fn task_seed(seed: u64, task: usize, k: usize) -> u64 {
    mix_seed(mix_seed(seed, task as u64), k as u64 + 1)
}

/// Solves `inputs[t]` for every `t` in `order` and hands each result to
/// `collect` as it arrives. With one worker tasks run in order on the
/// calling thread.
#[allow(clippy::too_many_arguments)]
fn solve_round<T: Scalar>(
    db: &GroundDatabase<T>,
    views: &[TaskView<T>],
    inputs: &[SubProblem<T>],
    order: &[usize],
    mode: Mode,
    config: &MasterConfig<T>,
    k: usize,
    mut collect: impl FnMut(usize, SolverResult<T>) -> Result<()>,
) -> Result<()> {
    let solve = |t: usize| solve_task(db, &views[t].spec, &inputs[t], mode, &config.solver, task_seed(config.seed, t, k));
    let workers = config.workers.clamp(1, order.len().max(1));
    if workers == 1 {
        for &t in order {
            collect(t, solve(t)?)?;
        }
        return Ok(());
    }
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, solve) = (&next, &solve);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&t) = order.get(i) else { break };
                if tx.send((t, solve(t))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut first_err = None;
        for (t, r) in rx {
            if first_err.is_some() {
                continue;
            }
            if let Err(e) = r.and_then(|r| collect(t, r)) {
                first_err = Some(e);
                next.store(order.len(), Ordering::Relaxed);
            }
        }
        first_err.map_or(Ok(()), Err)
    })
}

/// Solves every task with the current multipliers, records the copies and
/// updates each shared relation's multipliers as soon as all of its tasks
/// have reported.
fn round<T: Scalar>(
    db: &GroundDatabase<T>,
    dec: &mut Decomposition<T>,
    store: &mut MultiplierStore<T>,
    mode: Mode,
    config: &MasterConfig<T>,
    k: usize,
    stats: &mut ConvergenceStats<T>,
) -> Result<Vec<SolverResult<T>>> {
    let alpha = config.schedule.alpha(k);
    let inputs: Vec<SubProblem<T>> = (0..dec.views.len()).map(|t| dec.task_problem(t, store)).collect();
    let mut pending: BTreeMap<usize, usize> = BTreeMap::new();
    for rels in &dec.task_relations {
        for &r in rels {
            *pending.entry(r).or_default() += 1;
        }
    }
    dec.registry.clear_copies();
    let Decomposition { views, registry, sigma, task_relations, .. } = dec;
    let mut results: Vec<Option<SolverResult<T>>> = vec![None; views.len()];
    solve_round(db, views, &inputs, sigma, mode, config, k, |t, r| {
        stats.solver_calls += 1;
        registry.report(&views[t], &r.values);
        for &rel in &task_relations[t] {
            let left = pending.get_mut(&rel).expect("relation registered");
            *left -= 1;
            if *left == 0 {
                update_shared(registry, store, &registry.by_relation[&rel], alpha)?;
                stats.updates += 1;
            }
        }
        results[t] = Some(r);
        Ok(())
    })?;
    Ok(results.into_iter().map(|r| r.expect("every task reported")).collect())
}

/// World taking each atom from the last task in σ order whose view holds
/// it; atoms in no view are false.
fn finalize<T: Scalar>(dec: &Decomposition<T>, results: &[SolverResult<T>]) -> World {
    let mut world = vec![false; dec.owner.len()];
    for &t in &dec.sigma {
        write_view(&mut world, &dec.views[t], &results[t]);
    }
    world
}

fn write_view<T: Scalar>(world: &mut [bool], view: &TaskView<T>, result: &SolverResult<T>) {
    for (&g, &v) in view.sub.atoms.iter().zip(&result.values) {
        world[g] = v > T::of(0.5);
    }
}

/// Sequential pass in σ order in which each task is solved with the atoms
/// already decided by earlier tasks fixed.
fn bootstrap<T: Scalar>(
    db: &GroundDatabase<T>,
    dec: &Decomposition<T>,
    config: &MasterConfig<T>,
    stats: &mut ConvergenceStats<T>,
) -> Result<World> {
    let mut world = vec![false; db.num_atoms()];
    let mut decided = vec![false; db.num_atoms()];
    for &t in &dec.sigma {
        let view = &dec.views[t];
        let fixed: Vec<Option<bool>> = view.sub.atoms.iter().map(|&g| decided[g].then_some(world[g])).collect();
        let (reduced, kept) = view.sub.condition(&fixed);
        let seed = task_seed(config.seed, t, 0);
        stats.solver_calls += 1;
        let values = match solve_task(db, &view.spec, &reduced, Mode::Map, &config.solver, seed) {
            Ok(r) => kept.iter().zip(r.values).map(|(&i, v)| (view.sub.atoms[i], v)).collect::<Vec<_>>(),
            Err(Error::Infeasible(_)) => {
                stats.solver_calls += 1;
                let r = solve_task(db, &view.spec, &view.sub, Mode::Map, &config.solver, seed)?;
                view.sub.atoms.iter().copied().zip(r.values).filter(|&(g, _)| !decided[g]).collect()
            }
            Err(e) => return Err(e),
        };
        for (g, v) in values {
            world[g] = v > T::of(0.5);
            decided[g] = true;
        }
    }
    Ok(world)
}

/// MAP inference by dual decomposition.
///
/// Returns the cheapest full world among those assembled during the run:
/// the bootstrap world and, every round, the σ-ordered finalization and
/// each task's copy completed by it.
pub fn run_map<T: Scalar>(db: &GroundDatabase<T>, plan: &LogicalPlan, config: &MasterConfig<T>) -> Result<MapOutcome<T>> {
    let mut dec = Decomposition::new(db, plan, T::one());
    let mut store = MultiplierStore::zeros(&dec.registry);
    let mut stats = ConvergenceStats { iterations: Vec::new(), stop: StopReason::MaxIterations, solver_calls: 0, updates: 0 };
    let mut best: Option<(World, T)> = None;
    let consider = |w: World, best: &mut Option<(World, T)>| {
        let c = world_cost(db, &w);
        if best.as_ref().is_none_or(|b| c < b.1) {
            *best = Some((w, c));
        }
    };
    if !dec.registry.is_empty() {
        consider(bootstrap(db, &dec, config, &mut stats)?, &mut best);
    }
    let mut certified = false;
    for k in 0..config.max_iters.max(1) {
        let results = round(db, &mut dec, &mut store, Mode::Map, config, k, &mut stats)?;
        let base = finalize(&dec, &results);
        for &t in &dec.sigma {
            let mut w = base.clone();
            write_view(&mut w, &dec.views[t], &results[t]);
            consider(w, &mut best);
        }
        consider(base.clone(), &mut best);

        let exact = results.iter().all(|r| r.exact);
        let dual = results.iter().try_fold(db.fixed_cost, |acc, r| r.cost.map(|c| acc + c));
        let disagreement = dec.registry.disagreement(T::zero())?;
        stats.iterations.push(IterationStats {
            k,
            alpha: config.schedule.alpha(k),
            rmse: dec.registry.rmse()?,
            disagreement,
            best_primal: best.as_ref().map(|b| b.1),
            dual,
            multiplier_drift: store.max_abs_sum(),
        });
        if dec.registry.is_empty() {
            stats.stop = StopReason::NothingShared;
            certified = exact;
            break;
        }
        if disagreement == T::zero() {
            certified = exact && world_cost(db, &base).is_finite();
            if certified {
                best = Some((base.clone(), world_cost(db, &base)));
            }
        }
        if disagreement <= config.disagreement_threshold {
            stats.stop = StopReason::Agreement;
            break;
        }
    }
    let (world, cost) = best.expect("at least one round ran");
    if cost.is_infinite() {
        return Err(Error::Infeasible("no world found that satisfies every hard clause".into()));
    }
    Ok(MapOutcome { world, cost, certified, stats, multipliers: store, registry: dec.registry })
}

/// Marginal inference by dual decomposition. Soft weights are multiplied by
/// the number of tasks; a shared atom's output is the mean of its final
/// copies, any other atom takes its task's value, and atoms in no task 0.5.
pub fn run_marginal<T: Scalar>(
    db: &GroundDatabase<T>,
    plan: &LogicalPlan,
    config: &MasterConfig<T>,
) -> Result<MarginalOutcome<T>> {
    let m = T::of(plan.tasks.len().max(1) as f64);
    let mut dec = Decomposition::new(db, plan, m);
    let mut store = MultiplierStore::zeros(&dec.registry);
    let mut stats = ConvergenceStats { iterations: Vec::new(), stop: StopReason::MaxIterations, solver_calls: 0, updates: 0 };
    let mut last = Vec::new();
    for k in 0..config.max_iters.max(1) {
        last = round(db, &mut dec, &mut store, Mode::Marginal, config, k, &mut stats)?;
        let disagreement = dec.registry.disagreement(config.marginal_tolerance)?;
        stats.iterations.push(IterationStats {
            k,
            alpha: config.schedule.alpha(k),
            rmse: dec.registry.rmse()?,
            disagreement,
            best_primal: None,
            dual: None,
            multiplier_drift: store.max_abs_sum(),
        });
        if dec.registry.is_empty() {
            stats.stop = StopReason::NothingShared;
            break;
        }
        if disagreement <= config.disagreement_threshold {
            stats.stop = StopReason::Agreement;
            break;
        }
    }
    let mut marginals = vec![T::of(0.5); db.num_atoms()];
    for &t in &dec.sigma {
        for (&g, &v) in dec.views[t].sub.atoms.iter().zip(&last[t].values) {
            marginals[g] = v;
        }
    }
    for (p, &g) in dec.registry.atoms.iter().enumerate() {
        marginals[g] = dec.registry.mean(p)?;
    }
    Ok(MarginalOutcome { marginals, stats, multipliers: store, registry: dec.registry })
}
