//! In-memory relations, conjunctive views with binding patterns, and the
//! cost model that decides how much of a view to materialize up front.

mod cost;
mod eval;
mod relation;
mod tsv;
mod view;

pub use cost::{
    block_head, choose_plan, eager_blocks, estimate_block, estimate_inc, estimate_mat, exec_cost, explain_plan, inc_step,
    lazy_blocks, plan_for, set_partitions, CostBreakdown, CostModelParams, Estimate, MaterializationPlan,
    MAX_ENUMERATED_SUBGOALS,
};
pub use eval::{eval_eager, filter_binding, nested_loop_oracle, MaterializedView};
pub use relation::{Database, Relation, Stats};
pub use tsv::{dump_tsv, load_tsv};
pub use view::{AdornedView, Adornment, Subgoal, VTerm, ViewConstraint};
