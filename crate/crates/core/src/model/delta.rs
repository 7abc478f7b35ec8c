use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::instance::{Minutes, ProblemInstance, TimeWindow};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DependencySign {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Remove,
}

impl DependencySign {
    pub fn symbol(self) -> &'static str {
        match self {
            DependencySign::Add => "+",
            DependencySign::Remove => "-",
        }
    }
}

/// The five constraint-change labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DeltaKind {
    Dependency = 1,
    Duration = 2,
    StartTime = 3,
    RobotCount = 4,
    Conflict = 5,
}

impl DeltaKind {
    pub const ALL: [DeltaKind; 5] = [
        DeltaKind::Dependency,
        DeltaKind::Duration,
        DeltaKind::StartTime,
        DeltaKind::RobotCount,
        DeltaKind::Conflict,
    ];

    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn from_label(label: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == label)
    }
}

/// One typed constraint modification. Times are in minutes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintDelta {
    /// `task` becomes (or stops being) a predecessor of `successor`.
    Dependency {
        task: String,
        successor: String,
        sign: DependencySign,
    },
    Duration { task: String, minutes: Minutes },
    /// Shift of the earliest start, positive means later.
    StartTime { task: String, shift: Minutes },
    RobotCount { robot_type: String, change: i64 },
    Conflict { first: String, second: String },
}

impl ConstraintDelta {
    pub fn kind(&self) -> DeltaKind {
        match self {
            ConstraintDelta::Dependency { .. } => DeltaKind::Dependency,
            ConstraintDelta::Duration { .. } => DeltaKind::Duration,
            ConstraintDelta::StartTime { .. } => DeltaKind::StartTime,
            ConstraintDelta::RobotCount { .. } => DeltaKind::RobotCount,
            ConstraintDelta::Conflict { .. } => DeltaKind::Conflict,
        }
    }

    /// Checks references and payload ranges against an instance.
    pub fn validate(&self, instance: &ProblemInstance) -> Result<(), ModelError> {
        let task = |id: &str| {
            instance
                .task(id)
                .map(|_| ())
                .ok_or_else(|| ModelError::UnknownTask(id.to_string()))
        };
        match self {
            ConstraintDelta::Dependency { task: t, successor, .. } => {
                task(t)?;
                task(successor)?;
                if t == successor {
                    return Err(ModelError::InvalidDelta(format!("{t} cannot depend on itself")));
                }
            }
            ConstraintDelta::Duration { task: t, minutes } => {
                task(t)?;
                if *minutes <= 0 {
                    return Err(ModelError::InvalidDelta(format!(
                        "new duration of {t} must be positive, got {minutes} min"
                    )));
                }
            }
            ConstraintDelta::StartTime { task: t, .. } => task(t)?,
            ConstraintDelta::RobotCount { robot_type, .. } => {
                if instance.robot_type_index(robot_type).is_none() {
                    return Err(ModelError::UnknownRobotType(robot_type.clone()));
                }
            }
            ConstraintDelta::Conflict { first, second } => {
                task(first)?;
                task(second)?;
                if first == second {
                    return Err(ModelError::InvalidDelta(format!("{first} cannot conflict with itself")));
                }
            }
        }
        Ok(())
    }

    /// Positional parameters in the wire form, times in hours.
    pub fn parameters(&self) -> Vec<Value> {
        match self {
            ConstraintDelta::Dependency { task, successor, sign } => vec![
                Value::from(task.as_str()),
                Value::from(successor.as_str()),
                Value::from(sign.symbol()),
            ],
            ConstraintDelta::Duration { task, minutes } => {
                vec![Value::from(task.as_str()), minutes_to_hours_value(*minutes)]
            }
            ConstraintDelta::StartTime { task, shift } => {
                vec![Value::from(task.as_str()), minutes_to_hours_value(*shift)]
            }
            ConstraintDelta::RobotCount { robot_type, change } => {
                vec![Value::from(robot_type.as_str()), Value::from(*change)]
            }
            ConstraintDelta::Conflict { first, second } => {
                vec![Value::from(first.as_str()), Value::from(second.as_str())]
            }
        }
    }

    pub fn to_change(&self) -> Change {
        Change {
            constraint_type: self.kind().label(),
            parameters: self.parameters(),
        }
    }

    /// Parses one wire entry. Numbers may arrive as JSON numbers or as
    /// signed strings such as `"+2.5"`; durations and shifts are hours.
    pub fn from_change(change: &Change) -> Result<Self, ModelError> {
        let kind = DeltaKind::from_label(change.constraint_type).ok_or_else(|| {
            ModelError::InvalidDelta(format!("unknown constraint_type {}", change.constraint_type))
        })?;
        let p = &change.parameters;
        let arity = match kind {
            DeltaKind::Dependency => 3,
            _ => 2,
        };
        if p.len() != arity {
            return Err(ModelError::InvalidDelta(format!(
                "constraint_type {} expects {arity} parameters, got {}",
                kind.label(),
                p.len()
            )));
        }
        Ok(match kind {
            DeltaKind::Dependency => {
                let sign = match string_param(&p[2], "sign")?.trim() {
                    "+" => DependencySign::Add,
                    "-" | "\u{2212}" => DependencySign::Remove,
                    other => {
                        return Err(ModelError::InvalidDelta(format!(
                            "dependency sign must be + or -, got `{other}`"
                        )))
                    }
                };
                ConstraintDelta::Dependency {
                    task: id_param(&p[0], "task_id")?,
                    successor: id_param(&p[1], "successor")?,
                    sign,
                }
            }
            DeltaKind::Duration => ConstraintDelta::Duration {
                task: id_param(&p[0], "task_id")?,
                minutes: hours_to_minutes(number_param(&p[1], "new_duration")?),
            },
            DeltaKind::StartTime => ConstraintDelta::StartTime {
                task: id_param(&p[0], "task_id")?,
                shift: hours_to_minutes(number_param(&p[1], "start_time_change")?),
            },
            DeltaKind::RobotCount => {
                let change = number_param(&p[1], "robot_number_change")?;
                if change.fract() != 0.0 {
                    return Err(ModelError::InvalidDelta(format!(
                        "robot_number_change must be whole, got {change}"
                    )));
                }
                ConstraintDelta::RobotCount {
                    robot_type: id_param(&p[0], "robot_type_id")?,
                    change: change as i64,
                }
            }
            DeltaKind::Conflict => ConstraintDelta::Conflict {
                first: id_param(&p[0], "task_id1")?,
                second: id_param(&p[1], "task_id2")?,
            },
        })
    }
}

impl fmt::Display for ConstraintDelta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintDelta::Dependency { task, successor, sign } => {
                write!(f, "Dependency({task}, {successor}, {})", sign.symbol())
            }
            ConstraintDelta::Duration { task, minutes } => write!(f, "Duration({task}, {minutes} min)"),
            ConstraintDelta::StartTime { task, shift } => write!(f, "StartTime({task}, {shift:+} min)"),
            ConstraintDelta::RobotCount { robot_type, change } => {
                write!(f, "RobotCount({robot_type}, {change:+})")
            }
            ConstraintDelta::Conflict { first, second } => write!(f, "Conflict({first}, {second})"),
        }
    }
}

/// One entry of the `changes` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Change {
    pub constraint_type: u8,
    pub parameters: Vec<Value>,
}

/// `{"changes": [...]}`, the structured output exchanged with the
/// language model and stored in delta files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaDocument {
    pub changes: Vec<Change>,
}

impl DeltaDocument {
    pub fn from_deltas(deltas: &[ConstraintDelta]) -> Self {
        Self {
            changes: deltas.iter().map(ConstraintDelta::to_change).collect(),
        }
    }

    pub fn to_deltas(&self) -> Result<Vec<ConstraintDelta>, ModelError> {
        self.changes.iter().map(ConstraintDelta::from_change).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("delta document serializes")
    }
}

pub(crate) fn hours_to_minutes(hours: f64) -> Minutes {
    (hours * 60.0).round() as Minutes
}

pub(crate) fn minutes_to_hours_value(minutes: Minutes) -> Value {
    if minutes % 60 == 0 {
        Value::from(minutes / 60)
    } else {
        Value::from(minutes as f64 / 60.0)
    }
}

fn string_param<'a>(v: &'a Value, name: &str) -> Result<&'a str, ModelError> {
    v.as_str()
        .ok_or_else(|| ModelError::InvalidDelta(format!("parameter `{name}` must be a string, got {v}")))
}

fn id_param(v: &Value, name: &str) -> Result<String, ModelError> {
    let s = string_param(v, name)?.trim();
    if s.is_empty() {
        return Err(ModelError::InvalidDelta(format!("parameter `{name}` is empty")));
    }
    Ok(s.to_string())
}

fn number_param(v: &Value, name: &str) -> Result<f64, ModelError> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().trim_start_matches('+').parse::<f64>().ok(),
        _ => None,
    }
    .filter(|x| x.is_finite())
    .ok_or_else(|| ModelError::InvalidDelta(format!("parameter `{name}` must be a number, got {v}")))
}

/// Returns a new instance with every delta applied in order.
pub fn apply_deltas(
    instance: &ProblemInstance,
    deltas: &[ConstraintDelta],
) -> Result<ProblemInstance, ModelError> {
    let mut next = instance.clone();
    for delta in deltas {
        apply_one(&mut next, delta)?;
    }
    Ok(next)
}

fn apply_one(inst: &mut ProblemInstance, delta: &ConstraintDelta) -> Result<(), ModelError> {
    delta.validate(inst)?;
    let index_of = |inst: &ProblemInstance, id: &str| {
        inst.task_index(id)
            .ok_or_else(|| ModelError::UnknownTask(id.to_string()))
    };
    match delta {
        ConstraintDelta::Dependency { task, successor, sign } => {
            let s = index_of(inst, successor)?;
            let preds = &mut inst.tasks[s].predecessors;
            match sign {
                DependencySign::Add => {
                    if !preds.contains(task) {
                        preds.push(task.clone());
                    }
                }
                DependencySign::Remove => {
                    let before = preds.len();
                    preds.retain(|p| p != task);
                    if preds.len() == before {
                        return Err(ModelError::RemovingAbsentDependency {
                            task: task.clone(),
                            successor: successor.clone(),
                        });
                    }
                }
            }
        }
        ConstraintDelta::Duration { task, minutes } => {
            let i = index_of(inst, task)?;
            inst.tasks[i].duration = *minutes;
        }
        ConstraintDelta::StartTime { task, shift } => {
            let i = index_of(inst, task)?;
            let t = &mut inst.tasks[i];
            let old = t.window.unwrap_or(TimeWindow {
                earliest_start: 0,
                latest_end: None,
            });
            t.window = Some(TimeWindow {
                earliest_start: (old.earliest_start + shift).max(0),
                latest_end: old.latest_end,
            });
        }
        ConstraintDelta::RobotCount { robot_type, change } => {
            let r = inst
                .robot_type_index(robot_type)
                .ok_or_else(|| ModelError::UnknownRobotType(robot_type.clone()))?;
            let rt = &mut inst.robot_types[r];
            rt.count = (i64::from(rt.count) + change).max(0) as u32;
        }
        ConstraintDelta::Conflict { first, second } => {
            if !inst.has_conflict(first, second) {
                inst.conflicts.push((first.clone(), second.clone()));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_study;
    use crate::model::validate_instance;

    #[test]
    fn duration_delta_replaces_duration() {
        let inst = case_study::instance();
        let next = apply_deltas(
            &inst,
            &[ConstraintDelta::Duration { task: "T6".into(), minutes: 120 }],
        )
        .unwrap();
        assert_eq!(next.task("T6").unwrap().duration, 120);
    }

    #[test]
    fn start_time_delta_creates_lower_bound() {
        let inst = case_study::instance();
        let next = apply_deltas(
            &inst,
            &[ConstraintDelta::StartTime { task: "T11".into(), shift: 150 }],
        )
        .unwrap();
        assert_eq!(
            next.task("T11").unwrap().window,
            Some(TimeWindow { earliest_start: 150, latest_end: None })
        );
        // Shifts accumulate and floor at zero.
        let back = apply_deltas(
            &next,
            &[ConstraintDelta::StartTime { task: "T11".into(), shift: -200 }],
        )
        .unwrap();
        assert_eq!(back.task("T11").unwrap().window.unwrap().earliest_start, 0);
    }

    #[test]
    fn dependency_delta_adds_and_removes_edges() {
        let inst = case_study::instance();
        let add = ConstraintDelta::Dependency {
            task: "T13".into(),
            successor: "T9".into(),
            sign: DependencySign::Add,
        };
        let next = apply_deltas(&inst, &[add]).unwrap();
        assert!(next.task("T9").unwrap().predecessors.contains(&"T13".to_string()));

        let remove = ConstraintDelta::Dependency {
            task: "T3".into(),
            successor: "T9".into(),
            sign: DependencySign::Remove,
        };
        let next = apply_deltas(&next, std::slice::from_ref(&remove)).unwrap();
        assert!(!next.task("T9").unwrap().predecessors.contains(&"T3".to_string()));
        assert!(matches!(
            apply_deltas(&next, &[remove]),
            Err(ModelError::RemovingAbsentDependency { .. })
        ));
    }

    #[test]
    fn robot_count_floors_at_zero() {
        let inst = case_study::instance();
        let next = apply_deltas(
            &inst,
            &[ConstraintDelta::RobotCount { robot_type: "R2".into(), change: -5 }],
        )
        .unwrap();
        assert_eq!(next.robot_types[next.robot_type_index("R2").unwrap()].count, 0);
    }

    #[test]
    fn conflict_is_inserted_once() {
        let inst = case_study::instance();
        let c = ConstraintDelta::Conflict { first: "T6".into(), second: "T8".into() };
        let c2 = ConstraintDelta::Conflict { first: "T8".into(), second: "T6".into() };
        let next = apply_deltas(&inst, &[c, c2]).unwrap();
        assert_eq!(next.conflicts, vec![("T6".to_string(), "T8".to_string())]);
    }

    #[test]
    fn empty_delta_list_is_identity() {
        let inst = case_study::instance();
        assert_eq!(apply_deltas(&inst, &[]).unwrap(), inst);
    }

    #[test]
    fn unknown_references_are_errors() {
        let inst = case_study::instance();
        assert!(matches!(
            apply_deltas(&inst, &[ConstraintDelta::Duration { task: "T99".into(), minutes: 5 }]),
            Err(ModelError::UnknownTask(t)) if t == "T99"
        ));
        assert!(matches!(
            apply_deltas(&inst, &[ConstraintDelta::RobotCount { robot_type: "R9".into(), change: 1 }]),
            Err(ModelError::UnknownRobotType(_))
        ));
        assert!(matches!(
            apply_deltas(&inst, &[ConstraintDelta::Duration { task: "T1".into(), minutes: 0 }]),
            Err(ModelError::InvalidDelta(_))
        ));
    }

    #[test]
    fn cycle_introduced_by_delta_is_flagged() {
        let inst = case_study::instance();
        let next = apply_deltas(
            &inst,
            &[ConstraintDelta::Dependency {
                task: "T12".into(),
                successor: "T7".into(),
                sign: DependencySign::Add,
            }],
        )
        .unwrap();
        let report = validate_instance(&next);
        assert_eq!(report.issues.len(), 1);
    }

    #[test]
    fn wire_form_uses_hours() {
        let d = ConstraintDelta::StartTime { task: "T11".into(), shift: 150 };
        assert_eq!(serde_json::to_string(&d.to_change()).unwrap(), r#"{"constraint_type":3,"parameters":["T11",2.5]}"#);
        let d = ConstraintDelta::Duration { task: "T6".into(), minutes: 120 };
        assert_eq!(serde_json::to_string(&d.to_change()).unwrap(), r#"{"constraint_type":2,"parameters":["T6",2]}"#);
        let parsed = ConstraintDelta::from_change(&Change {
            constraint_type: 3,
            parameters: vec![Value::from("T7"), Value::from("+2")],
        })
        .unwrap();
        assert_eq!(parsed, ConstraintDelta::StartTime { task: "T7".into(), shift: 120 });
    }

    #[test]
    fn malformed_wire_entries_are_rejected() {
        let bad = [
            Change { constraint_type: 9, parameters: vec![] },
            Change { constraint_type: 2, parameters: vec![Value::from("T1")] },
            Change { constraint_type: 1, parameters: vec![Value::from("T1"), Value::from("T2"), Value::from("x")] },
            Change { constraint_type: 4, parameters: vec![Value::from("R1"), Value::from(0.5)] },
            Change { constraint_type: 2, parameters: vec![Value::from(3), Value::from(1)] },
        ];
        for change in bad {
            assert!(ConstraintDelta::from_change(&change).is_err(), "{change:?}");
        }
    }
}
