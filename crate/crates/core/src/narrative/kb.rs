//! Task and robot vocabulary used to ground narrative references.

use std::collections::BTreeSet;

use crate::model::{Minutes, ProblemInstance};
use crate::solver::minimal_teams;

use super::NarrativeError;

/// Everyday phrasings of the case-study capabilities. Capability names
/// themselves always count as phrases.
const CAPABILITY_PHRASES: &[(&str, &[&str])] = &[
    ("cargo container", &["cargo container", "cargo bed", "cargo"]),
    (
        "high-payload",
        &["high-payload arm", "high-payload", "heavy loads", "high-capacity arms", "high-capacity arm", "heavy-duty arm"],
    ),
    ("suction-based gripper", &["suction-based gripper", "suction gripper", "suction cups"]),
    (
        "precise parallel gripper",
        &["precise parallel gripper", "fine, precise tasks", "fine-movement grippers", "fine-movement gripper", "precision gripper"],
    ),
    ("normal parallel gripper", &["normal parallel gripper", "standard parallel gripper", "standard gripper"]),
    ("sprayer", &["sprayer", "spray nozzle"]),
    ("camera", &["camera"]),
    ("IAQ sensors", &["iaq sensors", "air-quality sensors", "air quality sensors"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct TaskEntry {
    pub id: String,
    pub description: String,
    /// Lowercase phrases that refer to the task, description included.
    pub aliases: Vec<String>,
    pub predecessors: Vec<String>,
    pub duration: Minutes,
    /// Robot types able to do the task alone or as a team, most specific
    /// first, e.g. `["R4", "R2"]`.
    pub robot_types: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotEntry {
    pub id: String,
    pub capabilities: Vec<String>,
    pub count: u32,
}

/// A span of narrative text that names a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub task: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskKnowledgeBase {
    pub tasks: Vec<TaskEntry>,
    pub robots: Vec<RobotEntry>,
    pub capabilities: Vec<String>,
    /// `(phrase, capability index)`, longest phrase first.
    capability_phrases: Vec<(String, usize)>,
    /// `(alias, task index)`, longest alias first.
    alias_index: Vec<(String, usize)>,
    instance: ProblemInstance,
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'#'
}

/// Whether `phrase` occurs in `text` at `at` on word boundaries.
fn matches_at(text: &str, at: usize, phrase: &str) -> bool {
    let bytes = text.as_bytes();
    let end = at + phrase.len();
    end <= bytes.len()
        && text.is_char_boundary(end)
        && text[at..end] == *phrase
        && (at == 0 || !is_word_byte(bytes[at - 1]))
        && (end == bytes.len() || !is_word_byte(bytes[end]))
}

/// Longest non-overlapping phrase matches, scanning left to right.
fn scan(text: &str, phrases: &[(String, usize)]) -> Vec<(usize, usize, usize)> {
    let lower = text.to_ascii_lowercase();
    let bytes = lower.as_bytes();
    let mut out = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        if at > 0 && is_word_byte(bytes[at - 1]) || !lower.is_char_boundary(at) {
            at += 1;
            continue;
        }
        match phrases.iter().find(|(p, _)| matches_at(&lower, at, p)) {
            Some((p, v)) => {
                out.push((at, at + p.len(), *v));
                at += p.len();
            }
            None => at += 1,
        }
    }
    out
}

impl TaskKnowledgeBase {
    pub fn from_instance(instance: &ProblemInstance) -> Self {
        // Team options are a property of the robot types, not of how many
        // happen to be on site.
        let mut stocked = instance.clone();
        for rt in &mut stocked.robot_types {
            rt.count = rt.count.max(8);
        }
        let tasks: Vec<TaskEntry> = instance
            .tasks
            .iter()
            .map(|task| {
                let mut teams = minimal_teams(&stocked, task);
                let cap_count = |t: usize| instance.robot_types[t].capabilities.iter().filter(|&&a| a > 0).count();
                teams.sort_by_key(|team| {
                    (team.size(), team.parts.iter().map(|&(t, _)| cap_count(t)).sum::<usize>(), team.parts.clone())
                });
                let robot_types = teams
                    .iter()
                    .map(|team| {
                        team.parts
                            .iter()
                            .map(|&(t, k)| {
                                let id = &instance.robot_types[t].id;
                                if k > 1 {
                                    format!("{k} {id}")
                                } else {
                                    id.clone()
                                }
                            })
                            .collect::<Vec<_>>()
                            .join(" + ")
                    })
                    .collect();
                let mut aliases: Vec<String> = std::iter::once(task.description.to_ascii_lowercase())
                    .chain(task.aliases.iter().map(|a| a.to_ascii_lowercase()))
                    .filter(|a| !a.trim().is_empty())
                    .collect();
                aliases.dedup();
                TaskEntry {
                    id: task.id.clone(),
                    description: task.description.clone(),
                    aliases,
                    predecessors: task.predecessors.clone(),
                    duration: task.duration,
                    robot_types,
                }
            })
            .collect();
        let capabilities: Vec<String> = instance.capabilities.iter().map(|c| c.name.clone()).collect();
        let robots = instance
            .robot_types
            .iter()
            .map(|rt| RobotEntry {
                id: rt.id.clone(),
                capabilities: rt
                    .capabilities
                    .iter()
                    .enumerate()
                    .filter(|&(_, &a)| a > 0)
                    .map(|(k, _)| capabilities[k].clone())
                    .collect(),
                count: rt.count,
            })
            .collect();

        let mut capability_phrases: Vec<(String, usize)> = Vec::new();
        for (k, name) in capabilities.iter().enumerate() {
            capability_phrases.push((name.to_ascii_lowercase(), k));
            if let Some((_, extra)) = CAPABILITY_PHRASES.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)) {
                capability_phrases.extend(extra.iter().map(|p| (p.to_ascii_lowercase(), k)));
            }
        }
        capability_phrases.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.cmp(b)));
        capability_phrases.dedup();

        let mut alias_index: Vec<(String, usize)> = tasks
            .iter()
            .enumerate()
            .flat_map(|(i, t)| t.aliases.iter().map(move |a| (a.clone(), i)))
            .collect();
        alias_index.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.cmp(b)));
        alias_index.dedup();

        Self { tasks, robots, capabilities, capability_phrases, alias_index, instance: instance.clone() }
    }

    pub fn case_study() -> Self {
        Self::from_instance(&crate::case_study::instance())
    }

    /// The instance the knowledge base was built from; deltas are
    /// validated against it.
    pub fn instance(&self) -> &ProblemInstance {
        &self.instance
    }

    /// Task references in reading order. Overlapping aliases resolve to
    /// the longest one, so "window frame installation" names T8 rather
    /// than T9.
    pub fn task_mentions(&self, text: &str) -> Result<Vec<Mention>, NarrativeError> {
        let mut out = Vec::new();
        for (start, end, task) in scan(text, &self.alias_index) {
            let owners: BTreeSet<usize> = self
                .alias_index
                .iter()
                .filter(|(a, _)| a.len() == end - start && text[start..end].eq_ignore_ascii_case(a))
                .map(|&(_, t)| t)
                .collect();
            if owners.len() > 1 {
                let ids: Vec<&str> = owners.iter().map(|&t| self.tasks[t].id.as_str()).collect();
                return Err(NarrativeError::UnresolvedReference {
                    phrase: text[start..end].to_string(),
                    reason: format!("could refer to any of {}", ids.join(", ")),
                });
            }
            out.push(Mention { start, end, task });
        }
        Ok(out)
    }

    /// Capability indices named in `text`.
    pub fn capabilities_in(&self, text: &str) -> BTreeSet<usize> {
        scan(text, &self.capability_phrases).into_iter().map(|(_, _, k)| k).collect()
    }

    /// The robot type described by a capability set: the type with exactly
    /// these capabilities, else the only type with the fewest extra ones.
    pub fn robot_for_capabilities(&self, wanted: &BTreeSet<usize>, phrase: &str) -> Result<String, NarrativeError> {
        let unresolved = |reason: String| NarrativeError::UnresolvedReference { phrase: phrase.trim().to_string(), reason };
        if wanted.is_empty() {
            return Err(unresolved("no robot type or capability is named".into()));
        }
        let supply: Vec<BTreeSet<usize>> = self
            .instance
            .robot_types
            .iter()
            .map(|rt| rt.capabilities.iter().enumerate().filter(|&(_, &a)| a > 0).map(|(k, _)| k).collect())
            .collect();
        if let Some(t) = supply.iter().position(|s| s == wanted) {
            return Ok(self.robots[t].id.clone());
        }
        let supersets: Vec<(usize, usize)> = supply
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_superset(wanted))
            .map(|(t, s)| (s.len(), t))
            .collect();
        let Some(&(fewest, _)) = supersets.iter().min() else {
            return Err(unresolved("no robot type has all the named capabilities".into()));
        };
        let best: Vec<usize> = supersets.iter().filter(|s| s.0 == fewest).map(|s| s.1).collect();
        if best.len() > 1 {
            let ids: Vec<&str> = best.iter().map(|&t| self.robots[t].id.as_str()).collect();
            return Err(unresolved(format!("matches {} equally well", ids.join(" and "))));
        }
        Ok(self.robots[best[0]].id.clone())
    }

    /// Robot type ids written literally in `text`, e.g. "R3".
    pub fn robot_ids_in(&self, text: &str) -> Vec<(usize, String)> {
        let phrases: Vec<(String, usize)> = {
            let mut v: Vec<(String, usize)> =
                self.robots.iter().enumerate().map(|(t, r)| (r.id.to_ascii_lowercase(), t)).collect();
            v.sort_by_key(|e| std::cmp::Reverse(e.0.len()));
            v
        };
        scan(text, &phrases).into_iter().map(|(s, _, t)| (s, self.robots[t].id.clone())).collect()
    }

    /// A phrase for each capability, for rendering.
    pub fn capability_phrases(&self, k: usize) -> Vec<&str> {
        self.capability_phrases.iter().filter(|p| p.1 == k).map(|p| p.0.as_str()).collect()
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(kb: &TaskKnowledgeBase, text: &str) -> Vec<String> {
        kb.task_mentions(text).unwrap().iter().map(|m| kb.tasks[m.task].id.clone()).collect()
    }

    #[test]
    fn window_tasks_are_told_apart() {
        let kb = TaskKnowledgeBase::case_study();
        assert_eq!(ids(&kb, "the window installation is late"), ["T9"]);
        assert_eq!(ids(&kb, "window frame installation slipped"), ["T8"]);
        assert_eq!(ids(&kb, "Move Window Frame, then Move Window"), ["T2", "T3"]);
        assert_eq!(ids(&kb, "the structural materials required for the HVAC duct"), ["T4"]);
    }

    #[test]
    fn robot_types_by_capability() {
        let kb = TaskKnowledgeBase::case_study();
        let resolve = |s: &str| kb.robot_for_capabilities(&kb.capabilities_in(s), s);
        assert_eq!(resolve("high-payload and normal parallel gripper").unwrap(), "R4");
        assert_eq!(resolve("handling heavy loads and performing fine, precise tasks").unwrap(), "R2");
        assert_eq!(resolve("high-capacity arms and fine-movement grippers").unwrap(), "R2");
        assert_eq!(resolve("a sprayer").unwrap(), "R6");
        assert!(resolve("high-payload").is_err());
        assert!(resolve("a bulldozer").is_err());
    }

    #[test]
    fn prompt_columns_list_specific_types_first() {
        let kb = TaskKnowledgeBase::case_study();
        assert_eq!(kb.tasks[5].robot_types, ["R4", "R2"]);
        assert_eq!(kb.tasks[6].robot_types, ["R5", "R2"]);
        assert_eq!(kb.tasks[13].robot_types, ["R7"]);
    }
}
