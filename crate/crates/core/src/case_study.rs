//! The construction case study: fourteen tasks, seven robot types, and the
//! builders used for the fleet/task-set scenarios.

use crate::model::{load_instance, Plan, ProblemInstance};

const FIXTURE: &str = include_str!("../fixtures/case_study.json");
const REFERENCE_SCHEDULE: &str = include_str!("../fixtures/reference_schedule.json");

/// Electrical wiring and painting set.
pub const WIRING_GROUP: [&str; 5] = ["T1", "T6", "T7", "T12", "T13"];
/// Window installation set.
pub const WINDOW_GROUP: [&str; 4] = ["T2", "T3", "T8", "T9"];
/// HVAC duct installation set.
pub const HVAC_GROUP: [&str; 4] = ["T4", "T5", "T10", "T11"];
pub const INSPECTION: &str = "T14";

/// Inclusive unit-count ranges per robot type, R1..R7.
pub const FLEET_RANGES: [(&str, u32, u32); 7] = [
    ("R1", 1, 4),
    ("R2", 1, 2),
    ("R3", 1, 2),
    ("R4", 1, 2),
    ("R5", 1, 2),
    ("R6", 1, 2),
    ("R7", 1, 1),
];

/// Tasks whose execution needs the same human specialist.
pub const SHARED_WORKER_TASKS: [&str; 6] = ["T6", "T7", "T8", "T9", "T12", "T13"];

/// The fourteen-task instance with one unit of every robot type.
pub fn instance() -> ProblemInstance {
    load_instance(FIXTURE.as_bytes()).expect("bundled case study fixture is valid")
}

pub fn fixture_json() -> &'static str {
    FIXTURE
}

/// How many copies of each task group a scenario contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSets {
    pub wiring: u32,
    pub window: u32,
    pub hvac: u32,
    pub inspection: bool,
}

impl TaskSets {
    pub const SINGLE: TaskSets = TaskSets {
        wiring: 1,
        window: 1,
        hvac: 1,
        inspection: true,
    };
}

/// Id of the `copy`-th instance (1-based) of a base task.
pub fn copy_id(base: &str, copy: u32) -> String {
    if copy <= 1 {
        base.to_string()
    } else {
        format!("{base}_{copy}")
    }
}

fn ordinal(copy: u32) -> &'static str {
    match copy {
        2 => "second",
        3 => "third",
        4 => "fourth",
        _ => "another",
    }
}

/// Builds a case-study scenario with the given fleet (`(type, count)`
/// pairs; unlisted types get zero units) and task-set multiplicities.
/// Copies keep their dependency structure inside the copy.
pub fn scenario(fleet: &[(&str, u32)], sets: TaskSets) -> ProblemInstance {
    let base = instance();
    let mut out = ProblemInstance {
        capabilities: base.capabilities.clone(),
        robot_types: base
            .robot_types
            .iter()
            .map(|rt| {
                let mut rt = rt.clone();
                rt.count = fleet
                    .iter()
                    .find(|(id, _)| *id == rt.id)
                    .map_or(0, |(_, c)| *c);
                rt
            })
            .collect(),
        tasks: Vec::new(),
        conflicts: Vec::new(),
        weights: base.weights,
        horizon: None,
    };

    let copies = |id: &str| -> u32 {
        if WIRING_GROUP.contains(&id) {
            sets.wiring
        } else if WINDOW_GROUP.contains(&id) {
            sets.window
        } else if HVAC_GROUP.contains(&id) {
            sets.hvac
        } else {
            u32::from(sets.inspection)
        }
    };
    let max_copies = sets.wiring.max(sets.window).max(sets.hvac).max(1);
    for copy in 1..=max_copies {
        for task in &base.tasks {
            if copies(&task.id) < copy {
                continue;
            }
            let mut t = task.clone();
            t.id = copy_id(&task.id, copy);
            t.predecessors = task.predecessors.iter().map(|p| copy_id(p, copy)).collect();
            if copy > 1 {
                let prefix = ordinal(copy);
                t.description = format!("{} ({prefix} set)", task.description);
                t.aliases = std::iter::once(task.description.to_lowercase())
                    .chain(task.aliases.iter().cloned())
                    .map(|a| format!("{prefix} {a}"))
                    .collect();
            }
            out.tasks.push(t);
        }
    }
    out
}

/// The fleet and task sets of the worked example: two R1, two R2, one
/// each of R3, R6, R7; one wiring set, one HVAC set, two window sets and
/// the site inspection.
pub fn example_schedule_instance() -> ProblemInstance {
    scenario(
        &[("R1", 2), ("R2", 2), ("R3", 1), ("R6", 1), ("R7", 1)],
        TaskSets {
            wiring: 1,
            window: 2,
            hvac: 1,
            inspection: true,
        },
    )
}

/// An optimal plan for [`example_schedule_instance`] (makespan 315) in
/// which one R1 unit moves T4 and then T5. The solver finds a different
/// plan of the same objective; this one is kept so the material-delay
/// replan has a fixed starting point.
pub fn reference_schedule() -> Plan {
    Plan::from_json(REFERENCE_SCHEDULE).expect("bundled reference schedule is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_instance;
    use crate::solver::{build_program, verify_plan};

    #[test]
    fn reference_schedule_is_optimal_and_feasible() {
        let inst = example_schedule_instance();
        let plan = reference_schedule();
        assert!(verify_plan(&inst, &plan).is_empty());
        assert_eq!(plan.makespan, 315);
        assert_eq!(build_program(&inst).unwrap().evaluate(&plan), Ok(plan.objective));
        let r1: Vec<_> = plan.robot_sequence("R1#0").iter().map(|e| e.task.as_str()).collect();
        assert_eq!(r1[1..3], ["T4", "T5"]);
    }

    #[test]
    fn fixture_matches_the_task_table() {
        let inst = instance();
        assert_eq!(inst.tasks.len(), 14);
        assert_eq!(inst.capabilities.len(), 8);
        let minutes: Vec<_> = inst.tasks.iter().map(|t| t.duration).collect();
        assert_eq!(minutes, vec![15, 15, 15, 15, 15, 30, 60, 60, 30, 120, 120, 120, 60, 30]);
        assert_eq!(inst.task("T11").unwrap().predecessors, vec!["T5", "T10"]);
        assert_eq!(inst.task("T9").unwrap().predecessors, vec!["T3", "T8"]);
    }

    #[test]
    fn example_instance_has_eighteen_tasks_and_seven_units() {
        let inst = example_schedule_instance();
        assert_eq!(inst.tasks.len(), 18);
        assert_eq!(inst.total_robot_count(), 7);
        assert_eq!(inst.task("T9_2").unwrap().predecessors, vec!["T3_2", "T8_2"]);
        assert!(validate_instance(&inst).is_empty());
    }

    #[test]
    fn largest_scenario_has_27_tasks_and_15_units() {
        let fleet: Vec<(&str, u32)> = FLEET_RANGES.iter().map(|(id, _, hi)| (*id, *hi)).collect();
        let inst = scenario(
            &fleet,
            TaskSets { wiring: 2, window: 2, hvac: 2, inspection: true },
        );
        assert_eq!(inst.tasks.len(), 27);
        assert_eq!(inst.total_robot_count(), 15);
        assert!(validate_instance(&inst).is_empty());
    }
}
