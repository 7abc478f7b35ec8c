//! Mid-execution replanning: tasks started by the replanning time keep
//! their assignment and times, the rest are re-optimized with penalties
//! for deviating from the original plan.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{Minutes, Plan, ProblemInstance, SolveStats, SolveStatus};
use crate::solver::{build_replan_program, solve, ReplanSetup, SolveLimits, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplanError {
    #[error("frozen history violates the updated constraints: {}", reasons.join("; "))]
    FrozenInfeasible { reasons: Vec<String> },
    #[error("no feasible replan: {reason}")]
    Infeasible { reason: String, stats: Option<SolveStats> },
    #[error("plans cover different tasks (missing {missing:?}, extra {extra:?})")]
    TaskSetMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("solve limits must be positive")]
    BudgetZero,
}

/// Original plan, replanning time and the updated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplanContext {
    pub original: Plan,
    pub at: Minutes,
    pub instance: ProblemInstance,
}

impl ReplanContext {
    pub fn new(original: Plan, at: Minutes, instance: ProblemInstance) -> Self {
        Self { original, at, instance }
    }

    /// `(started, future)` from the original plan.
    pub fn partition(&self) -> (Vec<String>, Vec<String>) {
        split_tasks(&self.original, self.at)
    }
}

/// Splits the plan's tasks into those started by `at` (a start exactly at
/// `at` counts as started) and those still to come, in plan order.
pub fn split_tasks(plan: &Plan, at: Minutes) -> (Vec<String>, Vec<String>) {
    let (started, future): (Vec<_>, Vec<_>) = plan.entries.iter().partition(|e| e.start <= at);
    (
        started.into_iter().map(|e| e.task.clone()).collect(),
        future.into_iter().map(|e| e.task.clone()).collect(),
    )
}

fn task_sets(a: &Plan, b_tasks: impl Iterator<Item = String>) -> Result<(), ReplanError> {
    let left: BTreeSet<String> = a.entries.iter().map(|e| e.task.clone()).collect();
    let right: BTreeSet<String> = b_tasks.collect();
    if left == right {
        return Ok(());
    }
    Err(ReplanError::TaskSetMismatch {
        missing: left.difference(&right).cloned().collect(),
        extra: right.difference(&left).cloned().collect(),
    })
}

/// Reassignment count and retiming minutes of `revised` against
/// `original`, summed over the `future` tasks.
pub fn plan_delta(original: &Plan, revised: &Plan, future: &[String]) -> Result<(i64, i64), ReplanError> {
    task_sets(original, revised.entries.iter().map(|e| e.task.clone()))?;
    let (mut dx, mut dt) = (0i64, 0i64);
    for task in future {
        let (Some(a), Some(b)) = (original.entry(task), revised.entry(task)) else {
            return Err(ReplanError::TaskSetMismatch { missing: vec![task.clone()], extra: vec![] });
        };
        dx += a.robots.iter().filter(|r| !b.robots.contains(r)).count() as i64;
        dx += b.robots.iter().filter(|r| !a.robots.contains(r)).count() as i64;
        dt += (b.start - a.start).abs() + (b.end - a.end).abs();
    }
    Ok((dx, dt))
}

fn frozen_violations(ctx: &ReplanContext, frozen: &[String]) -> Vec<String> {
    let inst = &ctx.instance;
    let units: Vec<String> = inst.robot_units().into_iter().map(|u| u.id).collect();
    let mut reasons = Vec::new();
    for id in frozen {
        let entry = ctx.original.entry(id).expect("partition comes from the plan");
        let task = inst.task(id).expect("task sets checked");
        for r in &entry.robots {
            if !units.contains(r) {
                reasons.push(format!("{id} was executed by {r}, which is no longer in the fleet"));
            }
        }
        if entry.end - entry.start != task.duration {
            reasons.push(format!(
                "{id} already started with duration {} but now takes {}",
                entry.end - entry.start,
                task.duration
            ));
        }
        if let Some(w) = task.window {
            if entry.start < w.earliest_start {
                reasons.push(format!("{id} started at {} before its new earliest start {}", entry.start, w.earliest_start));
            }
            if let Some(latest) = w.latest_end {
                if entry.end > latest {
                    reasons.push(format!("{id} ends at {} after its new deadline {latest}", entry.end));
                }
            }
        }
        for p in &task.predecessors {
            if !frozen.contains(p) {
                reasons.push(format!("{id} has started but its new predecessor {p} has not"));
            } else if let Some(pe) = ctx.original.entry(p) {
                if pe.end > entry.start {
                    reasons.push(format!("{id} started at {} before its new predecessor {p} ended at {}", entry.start, pe.end));
                }
            }
        }
    }
    for (a, b) in &inst.conflicts {
        if frozen.contains(a) && frozen.contains(b) {
            let (ea, eb) = (ctx.original.entry(a).unwrap(), ctx.original.entry(b).unwrap());
            if ea.start < eb.end && eb.start < ea.end {
                reasons.push(format!("{a} and {b} already overlap but may no longer run together"));
            }
        }
    }
    reasons.dedup();
    reasons
}

/// Re-optimizes the future tasks. The returned plan keeps every started
/// task's entry exactly as in the original plan, and no future task
/// starts before the replanning time.
pub fn replan(ctx: &ReplanContext, limits: &SolveLimits) -> Result<(Plan, SolveStats), ReplanError> {
    task_sets(&ctx.original, ctx.instance.tasks.iter().map(|t| t.id.clone()))?;
    let (frozen, _) = ctx.partition();
    let reasons = frozen_violations(ctx, &frozen);
    if !reasons.is_empty() {
        return Err(ReplanError::FrozenInfeasible { reasons });
    }

    // A derived horizon only guarantees room from time zero; shift it by
    // the replanning time.
    let horizon = match ctx.instance.horizon {
        Some(h) => h,
        None => ctx.instance.default_horizon() + ctx.at.max(0),
    };
    let setup = ReplanSetup { at: ctx.at, original: ctx.original.clone(), frozen: frozen.clone() };
    let program = build_replan_program(&ctx.instance, horizon, setup).map_err(|e| match e {
        SolverError::InstanceInvalid(report) => ReplanError::Infeasible {
            reason: format!("updated instance is not admissible: {report}"),
            stats: None,
        },
        SolverError::BudgetZero => ReplanError::BudgetZero,
    })?;
    let (mut plan, stats) = solve(&program, limits).map_err(|_| ReplanError::BudgetZero)?;
    if plan.status == SolveStatus::Infeasible {
        return Err(ReplanError::Infeasible {
            reason: "no schedule of the remaining tasks satisfies the updated constraints".into(),
            stats: Some(stats),
        });
    }
    for entry in &mut plan.entries {
        if frozen.contains(&entry.task) {
            *entry = ctx.original.entry(&entry.task).expect("frozen task").clone();
        }
    }
    Ok((plan, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PlanEntry;

    fn plan(entries: &[(&str, &[&str], i64, i64)]) -> Plan {
        Plan {
            entries: entries
                .iter()
                .map(|&(t, r, s, e)| PlanEntry {
                    task: t.into(),
                    robots: r.iter().map(|x| x.to_string()).collect(),
                    start: s,
                    end: e,
                })
                .collect(),
            objective: 0,
            makespan: entries.iter().map(|e| e.3).max().unwrap_or(0),
            status: SolveStatus::Optimal,
            stats: None,
        }
    }

    #[test]
    fn split_boundary_counts_as_started() {
        let p = plan(&[("A", &["R#0"], 0, 10), ("B", &["R#0"], 10, 20), ("C", &["R#0"], 20, 30)]);
        assert_eq!(split_tasks(&p, 10), (vec!["A".into(), "B".into()], vec!["C".to_string()]));
        assert_eq!(split_tasks(&p, 0).0, vec!["A".to_string()]);
        assert!(split_tasks(&p, 31).1.is_empty());
    }

    #[test]
    fn plan_delta_arithmetic() {
        let a = plan(&[("A", &["R#0"], 0, 10), ("B", &["R#0"], 10, 20)]);
        assert_eq!(plan_delta(&a, &a, &["B".into()]), Ok((0, 0)));

        let mut moved = a.clone();
        moved.entries[1].start += 10;
        moved.entries[1].end += 10;
        assert_eq!(plan_delta(&a, &moved, &["B".into()]), Ok((0, 20)));

        let mut swapped = a.clone();
        swapped.entries[1].robots = vec!["S#0".into()];
        assert_eq!(plan_delta(&a, &swapped, &["B".into()]), Ok((2, 0)));

        let short = plan(&[("A", &["R#0"], 0, 10)]);
        assert!(matches!(plan_delta(&a, &short, &[]), Err(ReplanError::TaskSetMismatch { .. })));
    }
}
