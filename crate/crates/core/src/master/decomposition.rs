use std::collections::BTreeMap;

use crate::compiler::LogicalPlan;
use crate::error::{Error, Result};
use crate::logic::{AtomId, GroundDatabase};
use crate::scalar::Scalar;
use crate::solvers::{SubProblem, TaskSpec};

/// One task's ground view: the clauses of its rules over the atoms they
/// mention.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskView<T> {
    /// Task id in the plan.
    pub task: usize,
    pub spec: TaskSpec,
    pub sub: SubProblem<T>,
    /// `(local atom, shared index, slot)` for every shared atom in the view.
    /// `slot` is the task's position among the atom's participants.
    pub shared: Vec<(usize, usize, usize)>,
}

/// Shared atoms with their participating tasks and the copies each task
/// reported in the current round.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedVariableRegistry<T> {
    /// Global ids, ascending.
    pub atoms: Vec<AtomId>,
    /// Participating task ids per shared atom, ascending.
    pub participants: Vec<Vec<usize>>,
    pub copies: Vec<Vec<Option<T>>>,
    /// Shared atom indices per predicate.
    pub by_relation: BTreeMap<usize, Vec<usize>>,
}

impl<T: Scalar> SharedVariableRegistry<T> {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn clear_copies(&mut self) {
        for c in &mut self.copies {
            c.iter_mut().for_each(|v| *v = None);
        }
    }

    /// Records the values a task returned for its shared atoms.
    pub fn report(&mut self, view: &TaskView<T>, values: &[T]) {
        for &(local, p, slot) in &view.shared {
            self.copies[p][slot] = Some(values[local]);
        }
    }

    fn complete_copies(&self, p: usize) -> Result<Vec<T>> {
        self.copies[p]
            .iter()
            .zip(&self.participants[p])
            .map(|(c, &task)| c.ok_or(Error::MissingCopy { task, atom: self.atoms[p] }))
            .collect()
    }

    pub fn mean(&self, p: usize) -> Result<T> {
        let xs = self.complete_copies(p)?;
        Ok(xs.iter().copied().sum::<T>() / T::of(xs.len() as f64))
    }

    /// Root mean square deviation of the copies from their per-atom means.
    pub fn rmse(&self) -> Result<T> {
        let mut sq = T::zero();
        let mut count = 0usize;
        for p in 0..self.len() {
            let mean = self.mean(p)?;
            for x in self.complete_copies(p)? {
                sq = sq + (x - mean) * (x - mean);
                count += 1;
            }
        }
        Ok(if count == 0 { T::zero() } else { (sq / T::of(count as f64)).sqrt() })
    }

    /// Fraction of shared atoms whose copies differ by more than `tol`.
    pub fn disagreement(&self, tol: T) -> Result<T> {
        if self.is_empty() {
            return Ok(T::zero());
        }
        let mut bad = 0usize;
        for p in 0..self.len() {
            let xs = self.complete_copies(p)?;
            let lo = xs.iter().copied().fold(T::infinity(), T::min);
            let hi = xs.iter().copied().fold(T::neg_infinity(), T::max);
            if hi - lo > tol {
                bad += 1;
            }
        }
        Ok(T::of(bad as f64) / T::of(self.len() as f64))
    }
}

/// Lagrange multipliers `λ[p][slot]`, one per participant of each shared
/// atom. A multiplier is added to the task's cost when the atom is true,
/// so it acts like a unit clause of weight `-λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierStore<T> {
    pub lambda: Vec<Vec<T>>,
}

impl<T: Scalar> MultiplierStore<T> {
    pub fn zeros<U>(registry: &SharedVariableRegistry<U>) -> Self {
        MultiplierStore { lambda: registry.participants.iter().map(|ps| vec![T::zero(); ps.len()]).collect() }
    }

    /// Largest `|sum_j λ[p][j]|` over shared atoms.
    pub fn max_abs_sum(&self) -> T {
        self.lambda.iter().map(|l| l.iter().copied().sum::<T>().abs()).fold(T::zero(), T::max)
    }
}

/// `α_k = α₀` (constant) or `α₀ / (1 + k/10)` (decay), `k` from 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule<T> {
    pub initial: T,
    pub decay: bool,
}

impl<T: Scalar> StepSchedule<T> {
    pub fn constant(initial: T) -> Self {
        StepSchedule { initial, decay: false }
    }

    pub fn decaying(initial: T) -> Self {
        StepSchedule { initial, decay: true }
    }

    pub fn alpha(&self, k: usize) -> T {
        if self.decay {
            self.initial / (T::one() + T::of(k as f64) / T::of(10.0))
        } else {
            self.initial
        }
    }
}

impl<T: Scalar> Default for StepSchedule<T> {
    fn default() -> Self {
        StepSchedule::decaying(T::one())
    }
}

/// `λ[p][j] += α (x[p][j] - mean_p)` for the given shared atoms. The last
/// participant is set to minus the sum of the others so that each atom's
/// multipliers sum to exactly zero in floating point.
pub fn update_shared<T: Scalar>(
    registry: &SharedVariableRegistry<T>,
    store: &mut MultiplierStore<T>,
    atoms: &[usize],
    alpha: T,
) -> Result<()> {
    for &p in atoms {
        let xs = registry.complete_copies(p)?;
        let mean = xs.iter().copied().sum::<T>() / T::of(xs.len() as f64);
        let lambda = &mut store.lambda[p];
        let last = lambda.len() - 1;
        let mut sum = T::zero();
        for j in 0..last {
            lambda[j] = lambda[j] + alpha * (xs[j] - mean);
            sum = sum + lambda[j];
        }
        lambda[last] = -sum;
    }
    Ok(())
}

/// Applies the update to every shared atom.
pub fn update_multipliers<T: Scalar>(
    registry: &SharedVariableRegistry<T>,
    store: &mut MultiplierStore<T>,
    alpha: T,
) -> Result<()> {
    let all: Vec<usize> = (0..registry.len()).collect();
    update_shared(registry, store, &all, alpha)
}

/// A plan's task views over a ground database, with soft weights multiplied
/// by `scale`, and the shared atoms between them.
#[derive(Debug, Clone)]
pub struct Decomposition<T> {
    pub views: Vec<TaskView<T>>,
    pub registry: SharedVariableRegistry<T>,
    /// Task order for bootstrapping and finalization.
    pub sigma: Vec<usize>,
    /// Per global atom: the last task in `sigma` whose view holds it.
    pub owner: Vec<Option<usize>>,
    /// Shared predicates each task touches.
    pub task_relations: Vec<Vec<usize>>,
}

impl<T: Scalar> Decomposition<T> {
    pub fn new(db: &GroundDatabase<T>, plan: &LogicalPlan, scale: T) -> Self {
        let mut views: Vec<TaskView<T>> = plan
            .tasks
            .iter()
            .map(|task| {
                let clauses = db.clauses.iter().filter(|c| task.rules.binary_search(&c.rule).is_ok());
                TaskView {
                    task: task.id,
                    spec: TaskSpec::new(task, plan, db),
                    sub: SubProblem::from_clauses(clauses, scale),
                    shared: Vec::new(),
                }
            })
            .collect();

        let mut holders: Vec<Vec<usize>> = vec![Vec::new(); db.num_atoms()];
        for v in &views {
            for &g in &v.sub.atoms {
                holders[g].push(v.task);
            }
        }
        let mut registry = SharedVariableRegistry {
            atoms: Vec::new(),
            participants: Vec::new(),
            copies: Vec::new(),
            by_relation: BTreeMap::new(),
        };
        for (g, hs) in holders.iter().enumerate() {
            if hs.len() < 2 {
                continue;
            }
            let p = registry.atoms.len();
            registry.atoms.push(g);
            registry.participants.push(hs.clone());
            registry.copies.push(vec![None; hs.len()]);
            registry.by_relation.entry(db.atom(g).predicate).or_default().push(p);
            for (slot, &t) in hs.iter().enumerate() {
                let local = views[t].sub.local(g).expect("holder contains the atom");
                views[t].shared.push((local, p, slot));
            }
        }

        let mut owner = vec![None; db.num_atoms()];
        for &t in &plan.sigma {
            for &g in &views[t].sub.atoms {
                owner[g] = Some(t);
            }
        }
        let mut task_relations = vec![Vec::new(); views.len()];
        for (&rel, ps) in &registry.by_relation {
            for &p in ps {
                for &t in &registry.participants[p] {
                    if !task_relations[t].contains(&rel) {
                        task_relations[t].push(rel);
                    }
                }
            }
        }
        Decomposition { views, registry, sigma: plan.sigma.clone(), owner, task_relations }
    }

    /// The task's problem with the current multipliers as priors.
    pub fn task_problem(&self, task: usize, store: &MultiplierStore<T>) -> SubProblem<T> {
        let view = &self.views[task];
        let mut sub = view.sub.clone();
        for &(local, p, slot) in &view.shared {
            sub.priors[local] = store.lambda[p][slot];
        }
        sub
    }
}
