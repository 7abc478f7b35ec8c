use serde::{Deserialize, Serialize};

/// Integer minutes. All solver arithmetic is exact on this unit.
pub type Minutes = i64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capability {
    pub id: usize,
    pub name: String,
}

/// A robot model with its capability supply vector and the number of
/// interchangeable units on site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotType {
    pub id: String,
    pub capabilities: Vec<u32>,
    pub count: u32,
}

/// Earliest start and optional latest end. A missing end means the task
/// is only bounded by the planning horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub earliest_start: Minutes,
    pub latest_end: Option<Minutes>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub description: String,
    pub duration: Minutes,
    pub requirements: Vec<u32>,
    pub predecessors: Vec<String>,
    pub window: Option<TimeWindow>,
    pub aliases: Vec<String>,
}

impl Task {
    pub fn earliest_start(&self) -> Minutes {
        self.window.map_or(0, |w| w.earliest_start)
    }
}

/// Objective weights: makespan, sum of completion times, team size,
/// reassignment penalty and retiming penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    pub makespan: i64,
    pub completion: i64,
    pub robots: i64,
    pub reassignment: i64,
    pub retiming: i64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            makespan: 1000,
            completion: 1,
            robots: 1,
            reassignment: 1,
            retiming: 1,
        }
    }
}

impl ObjectiveWeights {
    /// True when the makespan weight strictly dominates every other weight.
    pub fn makespan_dominates(&self) -> bool {
        [self.completion, self.robots, self.reassignment, self.retiming]
            .iter()
            .all(|&w| self.makespan > w)
    }
}

/// One physical robot obtained by expanding a [`RobotType`] count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotUnit {
    pub id: String,
    pub type_index: usize,
}

impl RobotUnit {
    pub fn unit_id(type_id: &str, ordinal: u32) -> String {
        format!("{type_id}#{ordinal}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProblemInstance {
    pub capabilities: Vec<Capability>,
    pub robot_types: Vec<RobotType>,
    pub tasks: Vec<Task>,
    pub conflicts: Vec<(String, String)>,
    pub weights: ObjectiveWeights,
    /// Explicit `T_large`; `None` means "derive from the tasks".
    pub horizon: Option<Minutes>,
}

impl ProblemInstance {
    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }

    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    pub fn robot_type_index(&self, id: &str) -> Option<usize> {
        self.robot_types.iter().position(|r| r.id == id)
    }

    /// `T_large`: the explicit horizon, or the sum of durations plus the
    /// latest window start plus one.
    pub fn horizon(&self) -> Minutes {
        self.horizon.unwrap_or_else(|| self.default_horizon())
    }

    pub fn default_horizon(&self) -> Minutes {
        let total: Minutes = self.tasks.iter().map(|t| t.duration.max(0)).sum();
        let latest_release = self
            .tasks
            .iter()
            .map(Task::earliest_start)
            .max()
            .unwrap_or(0);
        total + latest_release + 1
    }

    /// Expands robot types into individual units `R2#0`, `R2#1`, ...
    pub fn robot_units(&self) -> Vec<RobotUnit> {
        self.robot_types
            .iter()
            .enumerate()
            .flat_map(|(type_index, rt)| {
                (0..rt.count).map(move |k| RobotUnit {
                    id: RobotUnit::unit_id(&rt.id, k),
                    type_index,
                })
            })
            .collect()
    }

    pub fn total_robot_count(&self) -> usize {
        self.robot_types.iter().map(|r| r.count as usize).sum()
    }

    pub fn has_conflict(&self, a: &str, b: &str) -> bool {
        self.conflicts
            .iter()
            .any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }
}
