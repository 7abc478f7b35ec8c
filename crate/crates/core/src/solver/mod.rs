//! The scheduling program and its exact solver.

mod program;
mod search;
mod teams;
pub(crate) mod timing;
mod verify;

use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::model::{Plan, SolveStats, ValidationReport};

pub use program::{
    build_program, Constraint, ConstraintFamily, Deviation, FamilyCount, IntegerProgram, LinearExpr,
    Objective, ProgramSize, ReplanSetup, RowKind, RowViolation, Sense, VarFamily, VarId, Variable,
};
pub(crate) use program::build_replan_program;
pub use teams::{minimal_teams, TeamSpec};
pub use verify::{verify_plan, Violation, ViolationFamily, ViolationReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("instance is not admissible:\n{0}")]
    InstanceInvalid(ValidationReport),
    #[error("solve limits must be positive")]
    BudgetZero,
}

/// Search budgets. A zero gap asks for a proof of optimality.
#[derive(Debug, Clone)]
pub struct SolveLimits {
    pub time_budget: Duration,
    pub node_budget: u64,
    pub gap: f64,
    /// Cooperative cancellation, checked between nodes.
    pub stop: Option<Arc<AtomicBool>>,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            time_budget: Duration::from_secs(120),
            node_budget: u64::MAX,
            gap: 0.0,
            stop: None,
        }
    }
}

impl SolveLimits {
    pub fn with_time(seconds: f64) -> Self {
        Self { time_budget: Duration::from_secs_f64(seconds), ..Self::default() }
    }

    fn check(&self) -> Result<(), SolverError> {
        if self.time_budget.is_zero() || self.node_budget == 0 || self.gap.is_nan() || self.gap < 0.0 {
            return Err(SolverError::BudgetZero);
        }
        Ok(())
    }
}

/// Minimizes the program's objective. Infeasibility is reported through
/// the plan status.
pub fn solve(program: &IntegerProgram, limits: &SolveLimits) -> Result<(Plan, SolveStats), SolverError> {
    limits.check()?;
    let seed = program.replan.as_ref().and_then(|setup| {
        program.evaluate(&setup.original).ok().map(|objective| (objective, &setup.original))
    });
    let plan = search::run(program, limits, seed);
    let stats = plan.stats.clone().unwrap_or_else(SolveStats::empty);
    Ok((plan, stats))
}
