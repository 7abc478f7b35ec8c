//! Makespan-optimal allocation of heterogeneous robot teams to
//! interdependent construction tasks, with mid-execution replanning and
//! natural-language constraint updates.

pub mod bench;
pub mod case_study;
pub mod model;
pub mod narrative;
pub mod replan;
pub mod solver;
pub mod twin;

pub use model::{
    apply_deltas, load_instance, save_instance, validate_instance, ConstraintDelta, Plan, ProblemInstance,
};
pub use replan::{plan_delta, replan, split_tasks, ReplanContext};
pub use solver::{build_program, solve, verify_plan, SolveLimits};
