//! Independent feasibility check of a plan against an instance.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::model::{Plan, PlanEntry, ProblemInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationFamily {
    /// Missing, duplicated or unknown tasks and robots; inconsistent makespan.
    Plan,
    /// Times outside `[0, T_large]` for an explicit horizon.
    Bounds,
    Dependency,
    Capability,
    Linking,
    NoOverlap,
    Window,
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub family: ViolationFamily,
    pub tasks: Vec<String>,
    pub robots: Vec<String>,
    /// The violated inequality with the plan's numbers substituted.
    pub inequality: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}] {}", self.family, self.inequality)?;
        if !self.tasks.is_empty() {
            write!(f, " (tasks {})", self.tasks.join(", "))?;
        }
        if !self.robots.is_empty() {
            write!(f, " (robots {})", self.robots.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn of_family(&self, family: ViolationFamily) -> Vec<&Violation> {
        self.violations.iter().filter(|v| v.family == family).collect()
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("plan satisfies every constraint");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

struct Checker {
    report: ViolationReport,
}

impl Checker {
    fn push(&mut self, family: ViolationFamily, tasks: &[&str], robots: &[&str], inequality: String) {
        self.report.violations.push(Violation {
            family,
            tasks: tasks.iter().map(|s| s.to_string()).collect(),
            robots: robots.iter().map(|s| s.to_string()).collect(),
            inequality,
        });
    }
}

/// Checks every constraint family. An empty report means the plan is
/// feasible. The horizon bound is only checked when the instance sets
/// one explicitly.
pub fn verify_plan(instance: &ProblemInstance, plan: &Plan) -> ViolationReport {
    let mut c = Checker { report: ViolationReport::default() };
    let units = instance.robot_units();
    let unit_type: HashMap<&str, usize> = units.iter().map(|u| (u.id.as_str(), u.type_index)).collect();

    let mut entries: HashMap<&str, &PlanEntry> = HashMap::new();
    for e in &plan.entries {
        if instance.task(&e.task).is_none() {
            c.push(ViolationFamily::Plan, &[&e.task], &[], format!("task {} is not in the instance", e.task));
        } else if entries.insert(e.task.as_str(), e).is_some() {
            c.push(ViolationFamily::Plan, &[&e.task], &[], format!("task {} is scheduled twice", e.task));
        }
        let mut seen = Vec::new();
        for r in &e.robots {
            if !unit_type.contains_key(r.as_str()) {
                c.push(ViolationFamily::Plan, &[&e.task], &[r], format!("robot {r} is not in the fleet"));
            } else if seen.contains(&r) {
                c.push(ViolationFamily::Plan, &[&e.task], &[r], format!("robot {r} listed twice for {}", e.task));
            }
            seen.push(r);
        }
    }
    for task in &instance.tasks {
        if !entries.contains_key(task.id.as_str()) {
            c.push(ViolationFamily::Plan, &[&task.id], &[], format!("task {} has no entry", task.id));
        }
    }
    let max_end = plan.entries.iter().map(|e| e.end).max().unwrap_or(0);
    if plan.status.is_feasible() && plan.makespan != max_end {
        c.push(
            ViolationFamily::Plan,
            &[],
            &[],
            format!("makespan {} != max_i t^e_i = {max_end}", plan.makespan),
        );
    }

    for task in &instance.tasks {
        let Some(e) = entries.get(task.id.as_str()) else {
            continue;
        };
        let id = task.id.as_str();
        if e.end - e.start != task.duration {
            c.push(
                ViolationFamily::Linking,
                &[id],
                &[],
                format!("t^e({id}) - t^s({id}) = {} - {} = {} != T^D = {}", e.end, e.start, e.end - e.start, task.duration),
            );
        }
        if e.start < 0 {
            c.push(ViolationFamily::Bounds, &[id], &[], format!("t^s({id}) = {} >= 0", e.start));
        }
        if let Some(h) = instance.horizon {
            if e.end > h {
                c.push(ViolationFamily::Bounds, &[id], &[], format!("t^e({id}) = {} <= T_large = {h}", e.end));
            }
        }
        for p in &task.predecessors {
            if let Some(pe) = entries.get(p.as_str()) {
                if e.start < pe.end {
                    c.push(
                        ViolationFamily::Dependency,
                        &[p, id],
                        &[],
                        format!("t^s({id}) = {} >= t^e({p}) = {}", e.start, pe.end),
                    );
                }
            }
        }

        let team: Vec<&str> = e.robots.iter().map(String::as_str).filter(|r| unit_type.contains_key(r)).collect();
        let mut any = false;
        for (k, &need) in task.requirements.iter().enumerate() {
            if need == 0 {
                continue;
            }
            any = true;
            let have: u64 = team
                .iter()
                .map(|r| u64::from(instance.robot_types[unit_type[r]].capabilities.get(k).copied().unwrap_or(0)))
                .sum();
            if have < u64::from(need) {
                let name = instance.capabilities.get(k).map_or("?", |cap| cap.name.as_str());
                c.push(
                    ViolationFamily::Capability,
                    &[id],
                    &team,
                    format!("sum_r a[{name},r] * x[{id},r] = {have} >= b[{name},{id}] = {need}"),
                );
            }
        }
        if !any && team.is_empty() {
            c.push(ViolationFamily::Capability, &[id], &[], format!("sum_r x[{id},r] = 0 >= 1"));
        }

        if let Some(w) = task.window {
            if e.start < w.earliest_start {
                c.push(
                    ViolationFamily::Window,
                    &[id],
                    &[],
                    format!("t^s({id}) = {} >= T^s = {}", e.start, w.earliest_start),
                );
            }
            if let Some(latest) = w.latest_end {
                if e.end > latest {
                    c.push(ViolationFamily::Window, &[id], &[], format!("t^e({id}) = {} <= T^e = {latest}", e.end));
                }
            }
        }
    }

    for unit in &units {
        let seq = plan.robot_sequence(&unit.id);
        for (a, rest) in seq.iter().enumerate().map(|(k, a)| (a, &seq[k + 1..])) {
            for b in rest {
                if a.start < b.end && b.start < a.end {
                    c.push(
                        ViolationFamily::NoOverlap,
                        &[&a.task, &b.task],
                        &[&unit.id],
                        format!(
                            "t^e({}) = {} <= t^s({}) = {} or t^e({}) = {} <= t^s({}) = {}",
                            a.task, a.end, b.task, b.start, b.task, b.end, a.task, a.start
                        ),
                    );
                }
            }
        }
    }

    let mut pairs: Vec<(&str, &str)> = Vec::new();
    for (a, b) in &instance.conflicts {
        let key = if a < b { (a.as_str(), b.as_str()) } else { (b.as_str(), a.as_str()) };
        if pairs.contains(&key) {
            continue;
        }
        pairs.push(key);
        let (Some(ea), Some(eb)) = (entries.get(key.0), entries.get(key.1)) else {
            continue;
        };
        if ea.start < eb.end && eb.start < ea.end {
            c.push(
                ViolationFamily::Conflict,
                &[key.0, key.1],
                &[],
                format!(
                    "t^e({}) = {} <= t^s({}) = {} or t^e({}) = {} <= t^s({}) = {}",
                    key.0, ea.end, key.1, eb.start, key.1, eb.end, key.0, ea.start
                ),
            );
        }
    }

    c.report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_study;
    use crate::model::SolveStatus;

    fn plan(entries: Vec<(&str, &[&str], i64, i64)>) -> Plan {
        let entries: Vec<PlanEntry> = entries
            .into_iter()
            .map(|(t, r, s, e)| PlanEntry {
                task: t.into(),
                robots: r.iter().map(|x| x.to_string()).collect(),
                start: s,
                end: e,
            })
            .collect();
        let makespan = entries.iter().map(|e| e.end).max().unwrap_or(0);
        Plan { entries, objective: 0, makespan, status: SolveStatus::Optimal, stats: None }
    }

    fn two_moves() -> ProblemInstance {
        let mut inst = case_study::instance();
        inst.tasks.truncate(2);
        inst
    }

    #[test]
    fn overlap_on_one_robot_names_the_pair() {
        let p = plan(vec![("T1", &["R1#0"], 0, 15), ("T2", &["R1#0"], 5, 20)]);
        let report = verify_plan(&two_moves(), &p);
        let v = report.of_family(ViolationFamily::NoOverlap);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].tasks, vec!["T1", "T2"]);
        assert_eq!(v[0].robots, vec!["R1#0"]);
    }

    #[test]
    fn short_capability_is_instantiated() {
        let p = plan(vec![("T1", &["R2#0"], 0, 15), ("T2", &["R1#0"], 0, 15)]);
        let report = verify_plan(&two_moves(), &p);
        let v = report.of_family(ViolationFamily::Capability);
        assert_eq!(v.len(), 1);
        assert!(v[0].inequality.contains("= 0 >= b[cargo container,T1] = 1"), "{}", v[0].inequality);
    }

    #[test]
    fn dependency_window_and_conflict_checks() {
        let mut inst = case_study::instance();
        inst.tasks.truncate(7);
        inst.tasks[5].window = Some(crate::model::TimeWindow { earliest_start: 100, latest_end: None });
        inst.conflicts.push(("T6".into(), "T7".into()));
        let p = plan(vec![
            ("T1", &["R1#0"], 0, 15),
            ("T2", &["R1#0"], 15, 30),
            ("T3", &["R1#0"], 30, 45),
            ("T4", &["R1#0"], 45, 60),
            ("T5", &["R1#0"], 60, 75),
            ("T6", &["R2#0"], 10, 40),
            ("T7", &["R5#0"], 20, 80),
        ]);
        let report = verify_plan(&inst, &p);
        assert_eq!(report.of_family(ViolationFamily::Dependency).len(), 1, "{report}");
        assert_eq!(report.of_family(ViolationFamily::Window).len(), 1);
        assert_eq!(report.of_family(ViolationFamily::Conflict).len(), 1);
    }

    #[test]
    fn valid_plan_has_empty_report() {
        let p = plan(vec![("T1", &["R1#0"], 0, 15), ("T2", &["R1#0"], 15, 30)]);
        assert!(verify_plan(&two_moves(), &p).is_empty());
    }
}
