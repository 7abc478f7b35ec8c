use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::instance::Minutes;
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    FeasibleWithGap { gap: f64 },
    Infeasible,
}

impl SolveStatus {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, SolveStatus::Infeasible)
    }
}

/// Search statistics reported next to every plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: u64,
    pub wall_time_secs: f64,
    pub best_bound: i64,
    pub incumbent: Option<i64>,
    pub proven_optimal: bool,
}

impl SolveStats {
    pub fn empty() -> Self {
        Self {
            nodes: 0,
            wall_time_secs: 0.0,
            best_bound: 0,
            incumbent: None,
            proven_optimal: false,
        }
    }
}

/// Assignment and timing of one task. Robot-specific times equal the
/// task times for every assigned unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanEntry {
    pub task: String,
    pub robots: Vec<String>,
    pub start: Minutes,
    pub end: Minutes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub entries: Vec<PlanEntry>,
    pub objective: i64,
    pub makespan: Minutes,
    pub status: SolveStatus,
    pub stats: Option<SolveStats>,
}

impl Plan {
    pub fn infeasible(stats: SolveStats) -> Self {
        Self {
            entries: Vec::new(),
            objective: 0,
            makespan: 0,
            status: SolveStatus::Infeasible,
            stats: Some(stats),
        }
    }

    pub fn entry(&self, task: &str) -> Option<&PlanEntry> {
        self.entries.iter().find(|e| e.task == task)
    }

    /// Whether `robot` is in the team of `task` (`x_ir`).
    pub fn assigns(&self, task: &str, robot: &str) -> bool {
        self.entry(task).is_some_and(|e| e.robots.iter().any(|r| r == robot))
    }

    /// Tasks executed by one unit, ordered by start time.
    pub fn robot_sequence(&self, robot: &str) -> Vec<&PlanEntry> {
        let mut seq: Vec<&PlanEntry> = self
            .entries
            .iter()
            .filter(|e| e.robots.iter().any(|r| r == robot))
            .collect();
        seq.sort_by_key(|e| (e.start, e.end));
        seq
    }

    pub fn to_document(&self) -> PlanDocument {
        PlanDocument {
            assignments: self
                .entries
                .iter()
                .map(|e| (e.task.clone(), e.robots.clone()))
                .collect(),
            task_times: self
                .entries
                .iter()
                .map(|e| (e.task.clone(), [e.start, e.end]))
                .collect(),
            makespan_minutes: self.makespan,
            objective: self.objective,
            status: self.status,
            stats: self.stats.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: PlanDocument = serde_json::from_str(text).map_err(ModelError::from_json)?;
        doc.into_plan()
    }
}

/// Wire form of a [`Plan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub assignments: IndexMap<String, Vec<String>>,
    pub task_times: IndexMap<String, [Minutes; 2]>,
    pub makespan_minutes: Minutes,
    pub objective: i64,
    pub status: SolveStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<SolveStats>,
}

impl PlanDocument {
    pub fn into_plan(self) -> Result<Plan, ModelError> {
        let mut entries = Vec::with_capacity(self.task_times.len());
        for (task, [start, end]) in &self.task_times {
            let robots = self.assignments.get(task).cloned().ok_or_else(|| ModelError::Parse {
                line: 0,
                column: 0,
                message: format!("task `{task}` has times but no assignment"),
            })?;
            entries.push(PlanEntry {
                task: task.clone(),
                robots,
                start: *start,
                end: *end,
            });
        }
        if let Some(extra) = self.assignments.keys().find(|t| !self.task_times.contains_key(*t)) {
            return Err(ModelError::Parse {
                line: 0,
                column: 0,
                message: format!("task `{extra}` has an assignment but no times"),
            });
        }
        Ok(Plan {
            entries,
            objective: self.objective,
            makespan: self.makespan_minutes,
            status: self.status,
            stats: self.stats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_round_trip() {
        let plan = Plan {
            entries: vec![
                PlanEntry { task: "A".into(), robots: vec!["R1#0".into()], start: 0, end: 30 },
                PlanEntry { task: "B".into(), robots: vec!["R1#0".into(), "R2#1".into()], start: 30, end: 90 },
            ],
            objective: 90_000 + 120 + 3,
            makespan: 90,
            status: SolveStatus::FeasibleWithGap { gap: 0.25 },
            stats: None,
        };
        let text = plan.to_json();
        assert!(text.contains("\"makespan_minutes\": 90"));
        assert_eq!(Plan::from_json(&text).unwrap(), plan);
        assert_eq!(plan.robot_sequence("R1#0").len(), 2);
        assert!(plan.assigns("B", "R2#1"));
    }

    #[test]
    fn missing_assignment_is_rejected() {
        let text = r#"{"assignments":{},"task_times":{"A":[0,5]},"makespan_minutes":5,"objective":0,"status":"optimal"}"#;
        assert!(Plan::from_json(text).is_err());
    }
}
