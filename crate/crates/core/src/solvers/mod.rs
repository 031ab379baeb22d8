//! Per-task inference: exact classification and chain labeling, pivot
//! correlation clustering, and generic MaxSAT / Gibbs fallbacks.

mod chain;
mod classification;
mod coref;
mod dmo;
mod exact;
mod gibbs;
mod maxwalksat;
mod structured;
mod subproblem;

use crate::compiler::{LogicalPlan, Property, Task, TaskKind};
use crate::error::{Error, Result};
use crate::logic::GroundDatabase;
use crate::scalar::Scalar;

pub use chain::{solve_chain_map, solve_chain_marginal, ChainModel};
pub use classification::{solve_classification_map, solve_classification_marginal, ClassificationInput, ClassificationResult};
pub use coref::{solve_coref, CorefGraph, NeighborOracle};
pub use dmo::{engine_database, register_dmos, ViewOracle};
pub use exact::{exact_map, exact_marginals, EXACT_LIMIT};
pub use gibbs::{solve_generic_marginal, GibbsConfig};
pub use maxwalksat::{solve_generic_map, MwsConfig, MwsResult};
pub use subproblem::SubProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Map,
    Marginal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub mws: MwsConfig,
    pub gibbs: GibbsConfig,
    /// Largest component solved by enumeration.
    pub exact_limit: usize,
    /// Largest number of atoms outside a specialized solver's own relations
    /// that are enumerated rather than handled by alternating search.
    pub condition_limit: usize,
    /// Pivot runs per clustering; the cheapest is kept.
    pub coref_restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mws: MwsConfig::default(),
            gibbs: GibbsConfig::default(),
            exact_limit: EXACT_LIMIT,
            condition_limit: 10,
            coref_restarts: 8,
        }
    }
}

/// A relation a task solves for, resolved against the ground database.
#[derive(Debug, Clone, PartialEq)]
pub struct OwnedRelation {
    pub predicate: usize,
    /// Key positions when a hard rule makes the remaining position functional.
    pub key: Option<Vec<usize>>,
    /// Reflexive, symmetric and transitive by hard rules.
    pub equivalence: bool,
    /// Rules enforcing the key or the equivalence axioms.
    pub structural: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub owned: Vec<OwnedRelation>,
}

impl TaskSpec {
    pub fn new<T: Scalar>(task: &Task, plan: &LogicalPlan, db: &GroundDatabase<T>) -> Self {
        let owned = task
            .owned
            .iter()
            .filter_map(|name| {
                let predicate = db.predicate_index(name)?;
                let info = plan.relation(name)?;
                let arity = db.predicates[predicate].arity();
                Some(OwnedRelation {
                    predicate,
                    key: info.key.as_ref().map(|k| k.key.clone()),
                    equivalence: arity == 2 && info.has(Property::Ref) && info.has(Property::Sym) && info.has(Property::Trn),
                    structural: info.structural_rules.clone(),
                })
            })
            .collect();
        TaskSpec { kind: task.kind, owned }
    }

    pub fn generic() -> Self {
        TaskSpec { kind: TaskKind::Generic, owned: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult<T> {
    /// Per local atom: 0/1 in MAP mode, `Pr[true]` in marginal mode.
    pub values: Vec<T>,
    /// Cost of the returned world (MAP only), priors included.
    pub cost: Option<T>,
    /// Whether the result is provably optimal (MAP) or exact (marginal).
    pub exact: bool,
}

impl<T: Scalar> SolverResult<T> {
    fn from_world(world: &[bool], cost: T, exact: bool) -> Self {
        SolverResult { values: world.iter().map(|&b| if b { T::one() } else { T::zero() }).collect(), cost: Some(cost), exact }
    }

    pub fn world(&self) -> Vec<bool> {
        self.values.iter().map(|&v| v > T::of(0.5)).collect()
    }
}

pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Exact enumeration for small problems, local search or sampling otherwise.
pub fn solve_generic<T: Scalar>(sub: &SubProblem<T>, mode: Mode, config: &SolverConfig, seed: u64) -> Result<SolverResult<T>> {
    let small = sub.len() <= config.exact_limit;
    match (mode, small) {
        (Mode::Map, true) => {
            let (w, c) = exact_map(sub)?;
            Ok(SolverResult::from_world(&w, c, true))
        }
        (Mode::Map, false) => {
            let r = solve_generic_map(sub, &config.mws, seed);
            if !r.feasible {
                return Err(Error::Infeasible("local search found no world satisfying the hard clauses".into()));
            }
            Ok(SolverResult::from_world(&r.world, r.cost, false))
        }
        (Mode::Marginal, true) => {
            let (m, _) = exact_marginals(sub)?;
            Ok(SolverResult { values: m, cost: None, exact: true })
        }
        (Mode::Marginal, false) => {
            let m = solve_generic_marginal(sub, &config.gibbs, seed)?;
            Ok(SolverResult { values: m, cost: None, exact: false })
        }
    }
}

/// Solves one task. Coreference tasks are solved as a whole; other tasks are
/// split into connected components first. Components whose ground structure
/// does not fit the task's specialized solver use the generic one.
/// Probabilities are clamped to `[0, 1]` against round-off.
pub fn solve_task<T: Scalar>(
    db: &GroundDatabase<T>,
    spec: &TaskSpec,
    sub: &SubProblem<T>,
    mode: Mode,
    config: &SolverConfig,
    seed: u64,
) -> Result<SolverResult<T>> {
    let mut r = dispatch(db, spec, sub, mode, config, seed)?;
    if mode == Mode::Marginal {
        r.values.iter_mut().for_each(|v| *v = v.max(T::zero()).min(T::one()));
    }
    Ok(r)
}

fn dispatch<T: Scalar>(
    db: &GroundDatabase<T>,
    spec: &TaskSpec,
    sub: &SubProblem<T>,
    mode: Mode,
    config: &SolverConfig,
    seed: u64,
) -> Result<SolverResult<T>> {
    if spec.kind == TaskKind::Coref {
        if let Some(r) = structured::solve_clustering(db, spec, sub, mode, config, seed)? {
            return Ok(r);
        }
    }
    let mut values = vec![T::zero(); sub.len()];
    let mut cost = T::zero();
    let mut exact = true;
    for (k, (comp, map)) in sub.components().into_iter().enumerate() {
        let s = mix_seed(seed, k as u64);
        let r = match spec.kind {
            TaskKind::SimpleClassification | TaskKind::CorrelatedClassification => {
                match structured::solve_labeling(db, spec, &comp, mode, config, s)? {
                    Some(r) => r,
                    None => solve_generic(&comp, mode, config, s)?,
                }
            }
            _ => solve_generic(&comp, mode, config, s)?,
        };
        for (j, &i) in map.iter().enumerate() {
            values[i] = r.values[j];
        }
        if let Some(c) = r.cost {
            cost = cost + c;
        }
        exact &= r.exact;
    }
    Ok(SolverResult { values, cost: (mode == Mode::Map).then_some(cost), exact })
}

/// Connected components of a task's ground view.
pub fn partition_task<T: Scalar>(sub: &SubProblem<T>) -> Vec<(SubProblem<T>, Vec<usize>)> {
    sub.components()
}
