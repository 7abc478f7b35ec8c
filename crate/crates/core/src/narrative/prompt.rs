//! The extraction prompt: context tables, constraint types, step-by-step
//! instructions, three worked examples and the output schema.

use crate::model::ConstraintDelta;

use super::kb::TaskKnowledgeBase;
use super::NarrativeError;

const TEMPLATE: &str = include_str!("prompt_template.txt");

/// Block headings in the order they appear in a rendered prompt.
pub const PROMPT_BLOCKS: [&str; 6] = [
    "SYSTEM PROMPT:",
    "CONTEXT",
    "CONSTRAINT TYPES:",
    "STEP-BY-STEP INSTRUCTIONS:",
    "EXAMPLES:",
    "Please output your response in JSON format",
];

/// A template with `{name}` placeholders and `{{`/`}}` for literal braces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub text: &'static str,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self { text: TEMPLATE }
    }
}

impl PromptTemplate {
    /// Substitutes each placeholder once. Values are inserted as-is and
    /// never rescanned, so braces inside a narrative stay literal.
    pub fn render(&self, values: &[(&str, &str)]) -> String {
        let mut out = String::with_capacity(self.text.len() + 2048);
        let mut rest = self.text;
        while let Some(pos) = rest.find(['{', '}']) {
            out.push_str(&rest[..pos]);
            let tail = &rest[pos..];
            if tail.starts_with("{{") || tail.starts_with("}}") {
                out.push_str(&tail[..1]);
                rest = &tail[2..];
                continue;
            }
            if let Some(close) = tail.find('}').filter(|_| tail.starts_with('{')) {
                let name = &tail[1..close];
                let value = values
                    .iter()
                    .find(|(k, _)| *k == name)
                    .unwrap_or_else(|| panic!("template placeholder `{name}` has no value"))
                    .1;
                out.push_str(value);
                rest = &tail[close + 1..];
            } else {
                panic!("unbalanced brace in prompt template");
            }
        }
        out.push_str(rest);
        out
    }
}

fn hours(minutes: i64) -> String {
    let h = minutes as f64 / 60.0;
    let s = format!("{h:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn capitalized(s: &str) -> String {
    let mut c = s.chars();
    c.next().map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}

fn id_range(ids: &[&str]) -> String {
    match (ids.first(), ids.last()) {
        (Some(a), Some(b)) if a != b => format!("{a}-{b}"),
        (Some(a), _) => a.to_string(),
        _ => "none".into(),
    }
}

/// Renders the prompt for one narrative.
pub fn build_prompt(kb: &TaskKnowledgeBase, narrative: &str) -> Result<String, NarrativeError> {
    if narrative.trim().is_empty() {
        return Err(NarrativeError::EmptyNarrative);
    }
    let task_rows: Vec<String> = kb
        .tasks
        .iter()
        .map(|t| {
            let preds = if t.predecessors.is_empty() { "-".to_string() } else { t.predecessors.join(", ") };
            format!("- {} | {} | {} | {} | {}", t.id, preds, hours(t.duration), t.description, t.robot_types.join(" or "))
        })
        .collect();
    let robot_rows: Vec<String> = kb
        .robots
        .iter()
        .map(|r| {
            let caps: Vec<String> = r.capabilities.iter().map(|c| capitalized(c)).collect();
            format!("- {}: {}", r.id, caps.join(", "))
        })
        .collect();
    let task_ids: Vec<&str> = kb.tasks.iter().map(|t| t.id.as_str()).collect();
    let robot_ids: Vec<&str> = kb.robots.iter().map(|r| r.id.as_str()).collect();
    Ok(PromptTemplate::default().render(&[
        ("task_rows", &task_rows.join("\n")),
        ("robot_rows", &robot_rows.join("\n")),
        ("task_range", &id_range(&task_ids)),
        ("robot_range", &id_range(&robot_ids)),
        ("description", narrative),
    ]))
}

/// The three worked examples embedded in the prompt, with the deltas
/// their printed outputs denote.
pub fn worked_examples() -> Vec<(&'static str, Vec<ConstraintDelta>)> {
    use ConstraintDelta::*;
    vec![
        (
            "Due to how things are unfolding on-site, it's understood that the drilling machine is not functioning, so the wall will be drilled manually. The task is expected to take two hours, and in light of recent discussions, after coordinating with field staff, it seems that the original worker assigned to install the HVAC duct is no longer available; however, we have secured another worker who can arrive in 150 minutes.",
            vec![
                Duration { task: "T6".into(), minutes: 120 },
                StartTime { task: "T11".into(), shift: 150 },
            ],
        ),
        (
            "Recent developments suggest that wall painting takes 1.5 hours instead of 1 hour due to the need for multiple coats, and in light of recent adjustments, a revised understanding across teams indicates that a specialist required for electrical conduit installation calls in sick, preventing work from starting for 2 hours., followed by further refinements as recent developments suggest that wall painting takes 1.5 hours instead of 1 hour due to the need for multiple coats.",
            vec![
                Duration { task: "T13".into(), minutes: 90 },
                StartTime { task: "T7".into(), shift: 120 },
                Duration { task: "T13".into(), minutes: 90 },
            ],
        ),
        (
            "Task dependencies have shifted, and one of the robots capable of handling heavy loads and performing fine, precise tasks is currently out of service due to a mechanical failure. Additionally, in light of recent discussions and the evolving situation on-site, it appears that two robots with high-capacity arms and fine-movement grippers were not charged, and have now run out of power.",
            vec![
                RobotCount { robot_type: "R2".into(), change: -1 },
                RobotCount { robot_type: "R2".into(), change: -2 },
            ],
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_in_order_with_narrative() {
        let kb = TaskKnowledgeBase::case_study();
        let p = build_prompt(&kb, "drill late").unwrap();
        let mut at = 0;
        for block in PROMPT_BLOCKS {
            let pos = p[at..].find(block).unwrap_or_else(|| panic!("missing {block}")) + at;
            at = pos;
        }
        assert!(p.contains("extract all task relation changes in the specified JSON format: drill late"));
        assert!(p.contains("- T6 | - | 0.5 | Drill Wall | R4 or R2"));
        assert!(p.contains("- T7 | T1, T6 | 1 | Install Electrical Conduit | R5 or R2"));
        assert!(p.contains("- R2: High-payload, Precise parallel gripper, Normal parallel gripper"));
        assert!(p.contains("which task (T1-T14) or robot type (R1-R7)"));
    }

    #[test]
    fn five_constraint_types() {
        let p = build_prompt(&TaskKnowledgeBase::case_study(), "x").unwrap();
        let start = p.find("CONSTRAINT TYPES:").unwrap();
        let end = p.find("STEP-BY-STEP").unwrap();
        let types = p[start..end].lines().filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit())).count();
        assert_eq!(types, 5);
    }

    #[test]
    fn braces_in_narrative_stay_literal() {
        let kb = TaskKnowledgeBase::case_study();
        let p = build_prompt(&kb, "weird {description} and {{x}}").unwrap();
        assert_eq!(p.matches("weird {description} and {{x}}").count(), 1);
        assert_eq!(p.matches("{description}").count(), 1);
        assert!(p.contains(r#"{"changes": ["#));
    }

    #[test]
    fn empty_narrative_is_rejected() {
        assert!(matches!(build_prompt(&TaskKnowledgeBase::case_study(), "  "), Err(NarrativeError::EmptyNarrative)));
    }
}
