//! Execution state tracking over a virtual clock: task and robot status
//! panels, an append-only event log, and narrative interventions that
//! replan from the current clock.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{apply_deltas, load_instance, save_instance, ConstraintDelta, Minutes, Plan, PlanDocument, ProblemInstance};
use crate::narrative::{Extractor, NarrativeError, TaskKnowledgeBase};
use crate::replan::{plan_delta, replan, ReplanContext};
use crate::solver::{verify_plan, SolveLimits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Uninitiated,
    Ongoing,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotStatus {
    Idle,
    Executing(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TwinEvent {
    Genesis { instance: serde_json::Value, plan: PlanDocument },
    TaskStarted { task: String },
    TaskCompleted { task: String },
    /// The clock moved; written after the boundary events it caused.
    Advanced { to: Minutes },
    InterventionApplied { narrative: String, deltas: Vec<ConstraintDelta> },
    Replanned {
        plan_id: usize,
        reassignments: i64,
        retiming: i64,
        makespan_before: Minutes,
        makespan_after: Minutes,
        plan: PlanDocument,
    },
    InterventionFailed { narrative: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub seq: u64,
    pub at: Minutes,
    #[serde(flatten)]
    pub event: TwinEvent,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwinError {
    #[error("plan does not satisfy the instance: {0}")]
    PlanInvalid(String),
    #[error("clock cannot move back from {clock} to {to}")]
    ClockRegression { clock: Minutes, to: Minutes },
    #[error("extraction failed: {reason}")]
    ExtractionFailed { reason: String, diagnostics: Vec<String> },
    #[error("replanning failed: {0}")]
    ReplanInfeasible(String),
    #[error("event log is not replayable: {0}")]
    Replay(String),
}

/// What an intervention changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionReport {
    pub deltas: Vec<ConstraintDelta>,
    /// `None` when no delta was extracted and nothing was replanned.
    pub plan_id: Option<usize>,
    pub reassignments: i64,
    pub retiming: i64,
    pub makespan_before: Minutes,
    pub makespan_after: Minutes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinState {
    pub clock: Minutes,
    pub instance: ProblemInstance,
    pub plan: Plan,
    /// Index of the incumbent in the plan history, 0 for the initial plan.
    pub plan_id: usize,
    pub tasks: IndexMap<String, TaskStatus>,
    pub robots: IndexMap<String, RobotStatus>,
    pub events: Vec<LoggedEvent>,
}

/// Serializable view of a state without its event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinSnapshot {
    pub clock: Minutes,
    pub plan_id: usize,
    pub makespan: Minutes,
    pub tasks: IndexMap<String, TaskStatus>,
    pub robots: IndexMap<String, RobotStatus>,
    pub plan: PlanDocument,
    pub events: usize,
}

fn status_at(start: Minutes, end: Minutes, clock: Minutes) -> TaskStatus {
    if clock >= end {
        TaskStatus::Completed
    } else if clock >= start {
        TaskStatus::Ongoing
    } else {
        TaskStatus::Uninitiated
    }
}

fn instance_value(instance: &ProblemInstance) -> serde_json::Value {
    serde_json::from_slice(&save_instance(instance)).expect("instance document is JSON")
}

impl TwinState {
    /// Starts at clock 0. Tasks starting at 0 are already Ongoing.
    pub fn init(instance: &ProblemInstance, plan: &Plan) -> Result<Self, TwinError> {
        let report = verify_plan(instance, plan);
        if !report.is_empty() {
            return Err(TwinError::PlanInvalid(report.to_string()));
        }
        let mut state = Self {
            clock: 0,
            instance: instance.clone(),
            plan: plan.clone(),
            plan_id: 0,
            tasks: IndexMap::new(),
            robots: IndexMap::new(),
            events: Vec::new(),
        };
        state.log(TwinEvent::Genesis { instance: instance_value(instance), plan: plan.to_document() });
        state.refresh_statuses();
        let started: Vec<String> =
            state.tasks.iter().filter(|(_, s)| **s == TaskStatus::Ongoing).map(|(t, _)| t.clone()).collect();
        for task in started {
            state.log(TwinEvent::TaskStarted { task });
        }
        Ok(state)
    }

    fn log(&mut self, event: TwinEvent) {
        let seq = self.events.len() as u64;
        self.events.push(LoggedEvent { seq, at: self.clock, event });
    }

    fn refresh_statuses(&mut self) {
        self.tasks = self.plan.entries.iter().map(|e| (e.task.clone(), status_at(e.start, e.end, self.clock))).collect();
        self.robots = self.instance.robot_units().into_iter().map(|u| (u.id, RobotStatus::Idle)).collect();
        for e in &self.plan.entries {
            if self.tasks[&e.task] == TaskStatus::Ongoing {
                for r in &e.robots {
                    self.robots.insert(r.clone(), RobotStatus::Executing(e.task.clone()));
                }
            }
        }
    }

    /// Moves the clock forward, logging each start and completion crossed
    /// in time order. Completions precede starts at the same minute.
    pub fn advance(&mut self, to: Minutes) -> Result<(), TwinError> {
        if to < self.clock {
            return Err(TwinError::ClockRegression { clock: self.clock, to });
        }
        if to == self.clock {
            return Ok(());
        }
        let from = self.clock;
        let mut crossings: Vec<(Minutes, u8, String)> = Vec::new();
        for e in &self.plan.entries {
            if e.start > from && e.start <= to {
                crossings.push((e.start, 1, e.task.clone()));
            }
            if e.end > from && e.end <= to {
                crossings.push((e.end, 0, e.task.clone()));
            }
        }
        crossings.sort();
        for (at, kind, task) in crossings {
            self.clock = at;
            self.log(if kind == 0 { TwinEvent::TaskCompleted { task } } else { TwinEvent::TaskStarted { task } });
        }
        self.clock = to;
        self.log(TwinEvent::Advanced { to });
        self.refresh_statuses();
        Ok(())
    }

    /// Extracts deltas from `narrative`, applies them and replans from the
    /// current clock. On failure only an `InterventionFailed` event is
    /// added; instance, plan and statuses stay as they were.
    pub fn intervene(
        &mut self,
        narrative: &str,
        extractor: &Extractor,
        limits: &SolveLimits,
    ) -> Result<InterventionReport, TwinError> {
        let result = self.try_intervene(narrative, extractor, limits);
        if let Err(e) = &result {
            self.log(TwinEvent::InterventionFailed { narrative: narrative.to_string(), reason: e.to_string() });
        }
        result
    }

    fn try_intervene(
        &mut self,
        narrative: &str,
        extractor: &Extractor,
        limits: &SolveLimits,
    ) -> Result<InterventionReport, TwinError> {
        if narrative.trim().is_empty() {
            let reason = NarrativeError::EmptyNarrative.to_string();
            return Err(TwinError::ExtractionFailed { reason, diagnostics: Vec::new() });
        }
        let kb = TaskKnowledgeBase::from_instance(&self.instance);
        let extraction = extractor
            .extract(narrative, &kb)
            .map_err(|e| TwinError::ExtractionFailed { reason: e.to_string(), diagnostics: Vec::new() })?;
        if !extraction.diagnostics.is_empty() {
            return Err(TwinError::ExtractionFailed {
                reason: format!("{} change(s) could not be used", extraction.diagnostics.len()),
                diagnostics: extraction.diagnostics,
            });
        }
        let deltas = extraction.deltas;
        let makespan_before = self.plan.makespan;
        if deltas.is_empty() {
            self.log(TwinEvent::InterventionApplied { narrative: narrative.to_string(), deltas });
            return Ok(InterventionReport {
                deltas: Vec::new(),
                plan_id: None,
                reassignments: 0,
                retiming: 0,
                makespan_before,
                makespan_after: makespan_before,
            });
        }
        let updated = apply_deltas(&self.instance, &deltas).map_err(|e| TwinError::ExtractionFailed {
            reason: e.to_string(),
            diagnostics: vec![e.to_string()],
        })?;
        let ctx = ReplanContext::new(self.plan.clone(), self.clock, updated.clone());
        let (_, future) = ctx.partition();
        let (revised, _) = replan(&ctx, limits).map_err(|e| TwinError::ReplanInfeasible(e.to_string()))?;
        let (reassignments, retiming) =
            plan_delta(&self.plan, &revised, &future).map_err(|e| TwinError::ReplanInfeasible(e.to_string()))?;

        self.log(TwinEvent::InterventionApplied { narrative: narrative.to_string(), deltas: deltas.clone() });
        let before: IndexMap<String, TaskStatus> = self.tasks.clone();
        self.instance = updated;
        self.plan = revised;
        self.plan_id += 1;
        self.log(TwinEvent::Replanned {
            plan_id: self.plan_id,
            reassignments,
            retiming,
            makespan_before,
            makespan_after: self.plan.makespan,
            plan: self.plan.to_document(),
        });
        self.refresh_statuses();
        let started: Vec<String> = self
            .tasks
            .iter()
            .filter(|(t, s)| **s == TaskStatus::Ongoing && before.get(*t) != Some(&TaskStatus::Ongoing))
            .map(|(t, _)| t.clone())
            .collect();
        for task in started {
            self.log(TwinEvent::TaskStarted { task });
        }
        Ok(InterventionReport {
            deltas,
            plan_id: Some(self.plan_id),
            reassignments,
            retiming,
            makespan_before,
            makespan_after: self.plan.makespan,
        })
    }

    pub fn snapshot(&self) -> TwinSnapshot {
        TwinSnapshot {
            clock: self.clock,
            plan_id: self.plan_id,
            makespan: self.plan.makespan,
            tasks: self.tasks.clone(),
            robots: self.robots.clone(),
            plan: self.plan.to_document(),
            events: self.events.len(),
        }
    }

    /// Rebuilds a state from its event log alone.
    pub fn replay(events: &[LoggedEvent]) -> Result<Self, TwinError> {
        let bad = |m: String| TwinError::Replay(m);
        let Some(LoggedEvent { event: TwinEvent::Genesis { instance, plan }, .. }) = events.first() else {
            return Err(bad("log does not start with a genesis event".into()));
        };
        let instance = load_instance(instance.to_string().as_bytes()).map_err(|e| bad(e.to_string()))?;
        let plan = plan.clone().into_plan().map_err(|e| bad(e.to_string()))?;
        let mut state = Self {
            clock: 0,
            instance,
            plan,
            plan_id: 0,
            tasks: IndexMap::new(),
            robots: IndexMap::new(),
            events: Vec::with_capacity(events.len()),
        };
        for (i, logged) in events.iter().enumerate() {
            if logged.seq != i as u64 || logged.at < state.clock {
                return Err(bad(format!("event {i} is out of order")));
            }
            state.clock = logged.at;
            match &logged.event {
                TwinEvent::Genesis { .. } if i > 0 => return Err(bad(format!("event {i} is a second genesis"))),
                TwinEvent::Advanced { to } => state.clock = *to,
                TwinEvent::InterventionApplied { deltas, .. } if !deltas.is_empty() => {
                    state.instance = apply_deltas(&state.instance, deltas).map_err(|e| bad(e.to_string()))?;
                }
                TwinEvent::Replanned { plan_id, plan, .. } => {
                    state.plan = plan.clone().into_plan().map_err(|e| bad(e.to_string()))?;
                    state.plan_id = *plan_id;
                }
                _ => {}
            }
            state.events.push(logged.clone());
        }
        state.refresh_statuses();
        Ok(state)
    }

    /// The event log as newline-delimited JSON.
    pub fn events_ndjson(&self) -> String {
        self.events.iter().map(|e| serde_json::to_string(e).expect("event serializes") + "\n").collect()
    }

    pub fn parse_ndjson(text: &str) -> Result<Vec<LoggedEvent>, TwinError> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| TwinError::Replay(e.to_string())))
            .collect()
    }

    /// Recomputes statuses from plan and clock and compares; used to check
    /// that the panels never drift from the incumbent.
    pub fn is_consistent(&self) -> bool {
        let mut fresh = self.clone();
        fresh.refresh_statuses();
        fresh.tasks == self.tasks && fresh.robots == self.robots
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_study;
    use crate::model::{PlanEntry, SolveStatus};
    use crate::solver::{build_program, solve};

    fn example() -> TwinState {
        let inst = case_study::example_schedule_instance();
        let (plan, _) = solve(&build_program(&inst).unwrap(), &SolveLimits::default()).unwrap();
        TwinState::init(&inst, &plan).unwrap()
    }

    #[test]
    fn boundaries() {
        let mut inst = case_study::instance();
        inst.tasks.retain(|t| t.id == "T14");
        let plan = Plan {
            entries: vec![PlanEntry { task: "T14".into(), robots: vec!["R7#0".into()], start: 10, end: 25 }],
            objective: 0,
            makespan: 25,
            status: SolveStatus::Optimal,
            stats: None,
        };
        inst.tasks[0].duration = 15;
        let mut s = TwinState::init(&inst, &plan).unwrap();
        assert_eq!(s.tasks["T14"], TaskStatus::Uninitiated);
        s.advance(10).unwrap();
        assert_eq!(s.tasks["T14"], TaskStatus::Ongoing);
        assert_eq!(s.robots["R7#0"], RobotStatus::Executing("T14".into()));
        s.advance(25).unwrap();
        assert_eq!(s.tasks["T14"], TaskStatus::Completed);
        let n = s.events.len();
        s.advance(25).unwrap();
        assert_eq!(s.events.len(), n);
        assert!(matches!(s.advance(3), Err(TwinError::ClockRegression { .. })));
    }

    #[test]
    fn runs_to_completion_and_replays() {
        let mut s = example();
        let makespan = s.plan.makespan;
        s.advance(makespan).unwrap();
        assert!(s.tasks.values().all(|t| *t == TaskStatus::Completed));
        assert!(s.robots.values().all(|r| *r == RobotStatus::Idle));
        let replayed = TwinState::replay(&TwinState::parse_ndjson(&s.events_ndjson()).unwrap()).unwrap();
        assert_eq!(replayed, s);
    }

    #[test]
    fn zero_delta_intervention_only_logs() {
        let mut s = example();
        let before = s.clone();
        let report = s.intervene("All good on site today.", &Extractor::Rules, &SolveLimits::default()).unwrap();
        assert!(report.deltas.is_empty());
        assert_eq!(s.plan, before.plan);
        assert_eq!(s.events.len(), before.events.len() + 1);
    }

    #[test]
    fn unserviceable_fleet_keeps_incumbent() {
        let mut s = example();
        s.advance(12).unwrap();
        let before = s.clone();
        let err = s
            .intervene("One robot with a sprayer has broken down.", &Extractor::Rules, &SolveLimits::default())
            .unwrap_err();
        assert!(matches!(err, TwinError::ReplanInfeasible(_)), "{err}");
        assert_eq!((&s.plan, &s.instance, &s.tasks), (&before.plan, &before.instance, &before.tasks));
        assert!(matches!(s.events.last().unwrap().event, TwinEvent::InterventionFailed { .. }));
    }
}
