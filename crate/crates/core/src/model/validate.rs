use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::instance::{Minutes, ProblemInstance};

/// A structural defect that makes an instance inadmissible for solving.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    DuplicateCapability { name: String },
    CapabilityIdMismatch { name: String, expected: usize, found: usize },
    DuplicateRobotType { robot_type: String },
    RobotCapabilityLength { robot_type: String, expected: usize, found: usize },
    DuplicateTask { task: String },
    RequirementLength { task: String, expected: usize, found: usize },
    NonPositiveDuration { task: String, duration: Minutes },
    DanglingPredecessor { task: String, predecessor: String },
    DependencyCycle { tasks: Vec<String> },
    MalformedWindow { task: String, start: Minutes, end: Minutes, duration: Minutes },
    NegativeWindowStart { task: String, start: Minutes },
    DanglingConflict { first: String, second: String },
    SelfConflict { task: String },
    UnserviceableTask { task: String },
    WeightsNotDominant,
    NonPositiveHorizon { horizon: Minutes },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ValidationIssue::*;
        match self {
            DuplicateCapability { name } => write!(f, "capability `{name}` is declared twice"),
            CapabilityIdMismatch { name, expected, found } => {
                write!(f, "capability `{name}` has id {found}, expected {expected}")
            }
            DuplicateRobotType { robot_type } => write!(f, "robot type `{robot_type}` is declared twice"),
            RobotCapabilityLength { robot_type, expected, found } => write!(
                f,
                "robot type `{robot_type}` lists {found} capability amounts, expected {expected}"
            ),
            DuplicateTask { task } => write!(f, "task `{task}` is declared twice"),
            RequirementLength { task, expected, found } => write!(
                f,
                "task `{task}` lists {found} requirement amounts, expected {expected}"
            ),
            NonPositiveDuration { task, duration } => {
                write!(f, "task `{task}` has non-positive duration {duration}")
            }
            DanglingPredecessor { task, predecessor } => {
                write!(f, "task `{task}` depends on unknown task `{predecessor}`")
            }
            DependencyCycle { tasks } => write!(f, "dependency cycle among {}", tasks.join(", ")),
            MalformedWindow { task, start, end, duration } => write!(
                f,
                "task `{task}` cannot fit duration {duration} into window [{start}, {end}]"
            ),
            NegativeWindowStart { task, start } => {
                write!(f, "task `{task}` has negative window start {start}")
            }
            DanglingConflict { first, second } => {
                write!(f, "conflict ({first}, {second}) references an unknown task")
            }
            SelfConflict { task } => write!(f, "task `{task}` conflicts with itself"),
            UnserviceableTask { task } => {
                write!(f, "no team drawn from the fleet covers the requirements of `{task}`")
            }
            WeightsNotDominant => write!(f, "makespan weight must exceed every other weight"),
            NonPositiveHorizon { horizon } => write!(f, "horizon {horizon} is not positive"),
        }
    }
}

/// Every violated structural invariant. Empty means admissible.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn contains(&self, issue: &ValidationIssue) -> bool {
        self.issues.contains(issue)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, issue) in self.issues.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

pub fn validate_instance(instance: &ProblemInstance) -> ValidationReport {
    let mut issues = Vec::new();
    let n_caps = instance.capabilities.len();

    let mut seen = HashSet::new();
    for (k, cap) in instance.capabilities.iter().enumerate() {
        if !seen.insert(cap.name.as_str()) {
            issues.push(ValidationIssue::DuplicateCapability { name: cap.name.clone() });
        }
        if cap.id != k {
            issues.push(ValidationIssue::CapabilityIdMismatch {
                name: cap.name.clone(),
                expected: k,
                found: cap.id,
            });
        }
    }

    let mut seen = HashSet::new();
    for rt in &instance.robot_types {
        if !seen.insert(rt.id.as_str()) {
            issues.push(ValidationIssue::DuplicateRobotType { robot_type: rt.id.clone() });
        }
        if rt.capabilities.len() != n_caps {
            issues.push(ValidationIssue::RobotCapabilityLength {
                robot_type: rt.id.clone(),
                expected: n_caps,
                found: rt.capabilities.len(),
            });
        }
    }

    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, task) in instance.tasks.iter().enumerate() {
        if index.insert(task.id.as_str(), i).is_some() {
            issues.push(ValidationIssue::DuplicateTask { task: task.id.clone() });
        }
    }

    let supply = fleet_supply(instance);
    let fleet_size = instance.total_robot_count();
    for task in &instance.tasks {
        if task.requirements.len() != n_caps {
            issues.push(ValidationIssue::RequirementLength {
                task: task.id.clone(),
                expected: n_caps,
                found: task.requirements.len(),
            });
        }
        if task.duration <= 0 {
            issues.push(ValidationIssue::NonPositiveDuration {
                task: task.id.clone(),
                duration: task.duration,
            });
        }
        for pred in &task.predecessors {
            if !index.contains_key(pred.as_str()) {
                issues.push(ValidationIssue::DanglingPredecessor {
                    task: task.id.clone(),
                    predecessor: pred.clone(),
                });
            }
        }
        if let Some(w) = task.window {
            if w.earliest_start < 0 {
                issues.push(ValidationIssue::NegativeWindowStart {
                    task: task.id.clone(),
                    start: w.earliest_start,
                });
            }
            let end = w.latest_end.unwrap_or_else(|| instance.horizon());
            if w.earliest_start + task.duration > end {
                issues.push(ValidationIssue::MalformedWindow {
                    task: task.id.clone(),
                    start: w.earliest_start,
                    end,
                    duration: task.duration,
                });
            }
        }
        let covered = task
            .requirements
            .iter()
            .enumerate()
            .all(|(k, &need)| supply.get(k).copied().unwrap_or(0) >= u64::from(need));
        if !covered || fleet_size == 0 {
            issues.push(ValidationIssue::UnserviceableTask { task: task.id.clone() });
        }
    }

    for cycle in dependency_cycles(instance, &index) {
        issues.push(ValidationIssue::DependencyCycle { tasks: cycle });
    }

    for (a, b) in &instance.conflicts {
        if !index.contains_key(a.as_str()) || !index.contains_key(b.as_str()) {
            issues.push(ValidationIssue::DanglingConflict {
                first: a.clone(),
                second: b.clone(),
            });
        } else if a == b {
            issues.push(ValidationIssue::SelfConflict { task: a.clone() });
        }
    }

    if !instance.weights.makespan_dominates() {
        issues.push(ValidationIssue::WeightsNotDominant);
    }
    if let Some(h) = instance.horizon {
        if h <= 0 {
            issues.push(ValidationIssue::NonPositiveHorizon { horizon: h });
        }
    }

    ValidationReport { issues }
}

/// Total amount of each capability over every unit in the fleet.
pub(crate) fn fleet_supply(instance: &ProblemInstance) -> Vec<u64> {
    let mut supply = vec![0u64; instance.capabilities.len()];
    for rt in &instance.robot_types {
        for (k, &amount) in rt.capabilities.iter().enumerate() {
            if let Some(s) = supply.get_mut(k) {
                *s += u64::from(amount) * u64::from(rt.count);
            }
        }
    }
    supply
}

/// Strongly connected components of the dependency graph that contain a
/// cycle, each listed in instance order.
fn dependency_cycles(instance: &ProblemInstance, index: &HashMap<&str, usize>) -> Vec<Vec<String>> {
    let n = instance.tasks.len();
    // edge pred -> task
    let mut succ = vec![Vec::new(); n];
    let mut self_loop = vec![false; n];
    for (i, task) in instance.tasks.iter().enumerate() {
        for pred in &task.predecessors {
            if let Some(&p) = index.get(pred.as_str()) {
                if p == i {
                    self_loop[i] = true;
                }
                succ[p].push(i);
            }
        }
    }

    // Tarjan, iterative.
    let mut order = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut counter = 0;
    let mut components = Vec::new();

    for root in 0..n {
        if order[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        order[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut next)) = call.last_mut() {
            if *next < succ[v].len() {
                let w = succ[v][*next];
                *next += 1;
                if order[w] == usize::MAX {
                    order[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(order[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == order[v] {
                    let mut members = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        members.push(w);
                        if w == v {
                            break;
                        }
                    }
                    if members.len() > 1 || self_loop[v] {
                        members.sort_unstable();
                        components.push(members);
                    }
                }
            }
        }
    }

    components.sort();
    components
        .into_iter()
        .map(|c| c.into_iter().map(|i| instance.tasks[i].id.clone()).collect())
        .collect()
}
