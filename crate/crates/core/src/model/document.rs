//! Canonical JSON instance document.
//!
//! ```json
//! {
//!   "capabilities": ["cargo container", "sprayer"],
//!   "robot_types": [{"id": "R1", "capabilities": [1, 0], "count": 2}],
//!   "tasks": [{"id": "T1", "description": "Move conduit", "hours": 0.25,
//!              "requirements": {"cargo container": 1}, "predecessors": []}],
//!   "conflicts": [["T1", "T2"]],
//!   "weights": {"makespan": 1000, "completion": 1, "robots": 1},
//!   "horizon_minutes": null
//! }
//! ```
//!
//! Each task carries exactly one of `hours` or `minutes`. Capability
//! amounts may be a positional vector or a map keyed by capability name.
//! Saving always emits minutes and positional vectors.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::instance::{
    Capability, Minutes, ObjectiveWeights, ProblemInstance, RobotType, Task, TimeWindow,
};
use super::ModelError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDocument {
    capabilities: Vec<String>,
    robot_types: Vec<RobotTypeDocument>,
    tasks: Vec<TaskDocument>,
    #[serde(default)]
    conflicts: Vec<[String; 2]>,
    #[serde(default)]
    weights: WeightsDocument,
    #[serde(default)]
    horizon_minutes: Option<Minutes>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotTypeDocument {
    id: String,
    capabilities: Amounts,
    count: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Amounts {
    Vector(Vec<u32>),
    Named(IndexMap<String, u32>),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskDocument {
    id: String,
    #[serde(default)]
    description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hours: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    minutes: Option<Minutes>,
    requirements: Amounts,
    #[serde(default)]
    predecessors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window: Option<WindowDocument>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    aliases: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowDocument {
    start_minutes: Minutes,
    #[serde(default)]
    end_minutes: Option<Minutes>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsDocument {
    #[serde(default = "default_makespan")]
    makespan: i64,
    #[serde(default = "one")]
    completion: i64,
    #[serde(default = "one")]
    robots: i64,
    #[serde(default = "one")]
    reassignment: i64,
    #[serde(default = "one")]
    retiming: i64,
}

fn default_makespan() -> i64 {
    ObjectiveWeights::default().makespan
}

fn one() -> i64 {
    1
}

impl Default for WeightsDocument {
    fn default() -> Self {
        ObjectiveWeights::default().into()
    }
}

impl From<ObjectiveWeights> for WeightsDocument {
    fn from(w: ObjectiveWeights) -> Self {
        Self {
            makespan: w.makespan,
            completion: w.completion,
            robots: w.robots,
            reassignment: w.reassignment,
            retiming: w.retiming,
        }
    }
}

fn field_error(message: String) -> ModelError {
    ModelError::Parse {
        line: 0,
        column: 0,
        message,
    }
}

fn resolve_amounts(
    amounts: Amounts,
    capabilities: &[String],
    owner: &str,
) -> Result<Vec<u32>, ModelError> {
    match amounts {
        Amounts::Vector(v) => Ok(v),
        Amounts::Named(map) => {
            let mut v = vec![0; capabilities.len()];
            for (name, amount) in map {
                let k = capabilities.iter().position(|c| *c == name).ok_or_else(|| {
                    field_error(format!("{owner}: unknown capability `{name}`"))
                })?;
                v[k] = amount;
            }
            Ok(v)
        }
    }
}

fn task_minutes(doc: &TaskDocument) -> Result<Minutes, ModelError> {
    match (doc.hours, doc.minutes) {
        (Some(_), Some(_)) => Err(field_error(format!(
            "tasks[{}]: give either `hours` or `minutes`, not both",
            doc.id
        ))),
        (None, None) => Err(field_error(format!(
            "tasks[{}]: missing duration (`hours` or `minutes`)",
            doc.id
        ))),
        (None, Some(m)) => Ok(m),
        (Some(h), None) => {
            let m = h * 60.0;
            if !m.is_finite() || (m - m.round()).abs() > 1e-6 {
                return Err(field_error(format!(
                    "tasks[{}].hours = {h} is not a whole number of minutes",
                    doc.id
                )));
            }
            Ok(m.round() as Minutes)
        }
    }
}

/// Parses the canonical instance document.
pub fn load_instance(bytes: &[u8]) -> Result<ProblemInstance, ModelError> {
    let doc: InstanceDocument = serde_json::from_slice(bytes).map_err(ModelError::from_json)?;
    let capabilities: Vec<Capability> = doc
        .capabilities
        .iter()
        .enumerate()
        .map(|(id, name)| Capability { id, name: name.clone() })
        .collect();

    let robot_types = doc
        .robot_types
        .into_iter()
        .map(|rt| {
            let owner = format!("robot_types[{}]", rt.id);
            Ok(RobotType {
                capabilities: resolve_amounts(rt.capabilities, &doc.capabilities, &owner)?,
                id: rt.id,
                count: rt.count,
            })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;

    let tasks = doc
        .tasks
        .into_iter()
        .map(|t| {
            let duration = task_minutes(&t)?;
            let owner = format!("tasks[{}]", t.id);
            Ok(Task {
                requirements: resolve_amounts(t.requirements, &doc.capabilities, &owner)?,
                id: t.id,
                description: t.description,
                duration,
                predecessors: t.predecessors,
                window: t.window.map(|w| TimeWindow {
                    earliest_start: w.start_minutes,
                    latest_end: w.end_minutes,
                }),
                aliases: t.aliases,
            })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;

    let w = doc.weights;
    Ok(ProblemInstance {
        capabilities,
        robot_types,
        tasks,
        conflicts: doc.conflicts.into_iter().map(|[a, b]| (a, b)).collect(),
        weights: ObjectiveWeights {
            makespan: w.makespan,
            completion: w.completion,
            robots: w.robots,
            reassignment: w.reassignment,
            retiming: w.retiming,
        },
        horizon: doc.horizon_minutes,
    })
}

/// Serializes an instance to the canonical document (pretty JSON).
pub fn save_instance(instance: &ProblemInstance) -> Vec<u8> {
    let doc = InstanceDocument {
        capabilities: instance.capabilities.iter().map(|c| c.name.clone()).collect(),
        robot_types: instance
            .robot_types
            .iter()
            .map(|rt| RobotTypeDocument {
                id: rt.id.clone(),
                capabilities: Amounts::Vector(rt.capabilities.clone()),
                count: rt.count,
            })
            .collect(),
        tasks: instance
            .tasks
            .iter()
            .map(|t| TaskDocument {
                id: t.id.clone(),
                description: t.description.clone(),
                hours: None,
                minutes: Some(t.duration),
                requirements: Amounts::Vector(t.requirements.clone()),
                predecessors: t.predecessors.clone(),
                window: t.window.map(|w| WindowDocument {
                    start_minutes: w.earliest_start,
                    end_minutes: w.latest_end,
                }),
                aliases: t.aliases.clone(),
            })
            .collect(),
        conflicts: instance
            .conflicts
            .iter()
            .map(|(a, b)| [a.clone(), b.clone()])
            .collect(),
        weights: instance.weights.into(),
        horizon_minutes: instance.horizon,
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("instance serializes");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hours_are_normalized_to_minutes() {
        let doc = br#"{"capabilities":["c"],"robot_types":[{"id":"R","capabilities":[1],"count":1}],
            "tasks":[{"id":"T","hours":0.25,"requirements":[1]}]}"#;
        let inst = load_instance(doc).unwrap();
        assert_eq!(inst.tasks[0].duration, 15);
        assert_eq!(inst.weights, ObjectiveWeights::default());
        assert_eq!(inst.horizon, None);
    }

    #[test]
    fn empty_task_array_is_valid() {
        let doc = br#"{"capabilities":[],"robot_types":[],"tasks":[]}"#;
        let inst = load_instance(doc).unwrap();
        assert!(inst.tasks.is_empty());
        assert!(crate::model::validate_instance(&inst).is_empty());
    }

    #[test]
    fn named_requirements_resolve_by_capability() {
        let doc = br#"{"capabilities":["a","b"],"robot_types":[{"id":"R","capabilities":{"b":2},"count":1}],
            "tasks":[{"id":"T","minutes":5,"requirements":{"b":1}}]}"#;
        let inst = load_instance(doc).unwrap();
        assert_eq!(inst.robot_types[0].capabilities, vec![0, 2]);
        assert_eq!(inst.tasks[0].requirements, vec![0, 1]);
    }

    #[test]
    fn diagnostics_name_the_problem() {
        let both = br#"{"capabilities":[],"robot_types":[],"tasks":[{"id":"T","hours":1,"minutes":60,"requirements":[]}]}"#;
        let err = load_instance(both).unwrap_err().to_string();
        assert!(err.contains("tasks[T]"), "{err}");

        let fractional = br#"{"capabilities":[],"robot_types":[],"tasks":[{"id":"T","hours":0.001,"requirements":[]}]}"#;
        assert!(load_instance(fractional).unwrap_err().to_string().contains("whole number"));

        let unknown_cap = br#"{"capabilities":["a"],"robot_types":[],"tasks":[{"id":"T","minutes":1,"requirements":{"z":1}}]}"#;
        assert!(load_instance(unknown_cap).unwrap_err().to_string().contains("unknown capability `z`"));

        let syntax = b"{\n  \"capabilities\": [,]\n}";
        match load_instance(syntax).unwrap_err() {
            ModelError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn case_study_fixture_round_trips() {
        let inst = crate::case_study::instance();
        let again = load_instance(&save_instance(&inst)).unwrap();
        assert_eq!(again, inst);
    }
}
