//! Deterministic pattern-based extraction.
//!
//! A narrative is scanned for trigger phrases ("takes 2 hours", "must be
//! completed before", "out of service", ...). Each trigger reads its task
//! or robot references from the text between the previous trigger and
//! itself, and two-task triggers may also read the first task named after
//! them. The clause templates the corpus generator renders live next to the
//! patterns that read them back.

use std::sync::OnceLock;

use regex::Regex;

use crate::model::{ConstraintDelta, DependencySign, Minutes};

use super::kb::{Mention, TaskKnowledgeBase};
use super::NarrativeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Trigger {
    Duration,
    /// Start shift by the matched duration times the sign.
    Shift(i64),
    /// "delayed until half past the hour": the shift is the clock offset.
    Until,
    /// `a <phrase> b` makes a a predecessor of b.
    Precedes(DependencySign),
    /// `b <phrase> a` makes a a predecessor of b.
    Follows(DependencySign),
    /// `a and b <phrase>`.
    ConflictPair,
    /// `a <phrase> b`.
    ConflictWith,
    Robots(i64),
}

/// A trigger pattern and the clauses that exercise it. Clause placeholders:
/// `{task}`, `{a}`, `{b}`, `{robots}`, `{dur}`, `{old}` and the verb forms
/// `{is}`, `{was}`, `{has}` agreeing with `{robots}`.
pub(super) struct Family {
    pub trigger: Trigger,
    pub pattern: &'static str,
    pub clauses: &'static [&'static str],
}

const DUR: &str = r"(?:half an hour|(?:a|one|three) quarters? of an hour|an? hour and a half|(?:\d+(?:\.\d+)?|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve|an?)(?: and a half)? (?:hours?|minutes?|mins?))";

pub(super) const FAMILIES: &[Family] = &[
    Family {
        trigger: Trigger::Duration,
        pattern: r"\b(?:(?:is expected to|will now|will|now) )?takes? (?P<d>{DUR})(?: instead of (?:the planned )?{DUR})?",
        clauses: &[
            "{task} takes {dur} instead of {old}",
            "{task} is expected to take {dur}",
            "the crew reports that {task} will now take {dur}",
            "{task} now takes {dur} instead of the planned {old}",
        ],
    },
    Family {
        trigger: Trigger::Duration,
        pattern: r"\bnow requires (?P<d>{DUR})",
        clauses: &["{task} now requires {dur} because of rework"],
    },
    Family {
        trigger: Trigger::Shift(1),
        pattern: r"\bdelayed by (?P<d>{DUR})",
        clauses: &["{task} has been delayed by {dur}", "the start of {task} is delayed by {dur}"],
    },
    Family {
        trigger: Trigger::Shift(1),
        pattern: r"\barriv(?:e|es|ing) (?P<d>{DUR}) late",
        clauses: &["the worker for {task} will be arriving {dur} late"],
    },
    Family {
        trigger: Trigger::Shift(1),
        pattern: r"\barrive in (?P<d>{DUR})",
        clauses: &[
            "the original worker assigned to {task} is no longer available; however, we have secured another worker who can arrive in {dur}",
        ],
    },
    Family {
        trigger: Trigger::Shift(1),
        pattern: r"\bpreventing work from starting for (?P<d>{DUR})",
        clauses: &["a specialist required for {task} calls in sick, preventing work from starting for {dur}"],
    },
    Family {
        trigger: Trigger::Until,
        pattern: r"\bdelayed until (?P<u>half past the hour|a quarter past the hour|(?P<d>{DUR}) past the hour)",
        clauses: &[],
    },
    Family {
        trigger: Trigger::Shift(-1),
        pattern: r"\bcan start (?P<d>{DUR}) earlier",
        clauses: &["{task} can start {dur} earlier than planned"],
    },
    Family {
        trigger: Trigger::Shift(-1),
        pattern: r"\bahead of schedule by (?P<d>{DUR})",
        clauses: &["the team working on {task} is ahead of schedule by {dur}"],
    },
    Family {
        trigger: Trigger::Precedes(DependencySign::Add),
        pattern: r"\bmust be (?:completed|finished) before\b",
        clauses: &["{a} must be completed before {b} can begin", "{a} must be finished before {b}"],
    },
    Family {
        trigger: Trigger::Follows(DependencySign::Add),
        pattern: r"\bcan only (?:start|begin) (?:after|once)\b",
        clauses: &["{b} can only start after {a} is done", "{b} can only begin once {a} is finished"],
    },
    Family {
        trigger: Trigger::Follows(DependencySign::Remove),
        pattern: r"\bno longer needs to wait for\b",
        clauses: &["{b} no longer needs to wait for {a}"],
    },
    Family {
        trigger: Trigger::Precedes(DependencySign::Remove),
        pattern: r"\bno longer has to be (?:completed|finished) before\b",
        clauses: &["{a} no longer has to be finished before {b}"],
    },
    Family {
        trigger: Trigger::ConflictPair,
        pattern: r"\bcannot run at the same time\b",
        clauses: &["{a} and {b} cannot run at the same time because they share a worker"],
    },
    Family {
        trigger: Trigger::ConflictWith,
        pattern: r"\bcannot be performed concurrently with\b",
        clauses: &["{a} cannot be performed concurrently with {b}"],
    },
    Family {
        trigger: Trigger::Robots(-1),
        pattern: r"\bout of service\b",
        clauses: &["{robots} {is} currently out of service due to a mechanical failure"],
    },
    Family {
        trigger: Trigger::Robots(-1),
        pattern: r"\b(?:run|ran) out of power\b",
        clauses: &["{robots} {was} not charged, and {has} now run out of power"],
    },
    Family {
        trigger: Trigger::Robots(-1),
        pattern: r"\b(?:has|have) broken down\b",
        clauses: &["{robots} {has} broken down"],
    },
    Family {
        trigger: Trigger::Robots(1),
        pattern: r"\b(?:has|have) (?:just )?arrived\b",
        clauses: &["{robots} {has} just arrived on site"],
    },
    Family {
        trigger: Trigger::Robots(1),
        pattern: r"\b(?:has|have) been delivered\b",
        clauses: &["{robots} {has} been delivered"],
    },
    Family {
        trigger: Trigger::Robots(1),
        pattern: r"\b(?:is|are) (?:now )?(?:available|on site)\b",
        clauses: &["{robots} {is} now available"],
    },
];

pub(super) const NUMBER_WORDS: [&str; 13] =
    ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve"];

fn compiled() -> &'static [(Trigger, Regex)] {
    static CELL: OnceLock<Vec<(Trigger, Regex)>> = OnceLock::new();
    CELL.get_or_init(|| {
        FAMILIES
            .iter()
            .map(|f| (f.trigger, Regex::new(&f.pattern.replace("{DUR}", DUR)).expect("trigger pattern compiles")))
            .collect()
    })
}

fn count_regex() -> &'static Regex {
    static CELL: OnceLock<Regex> = OnceLock::new();
    CELL.get_or_init(|| {
        Regex::new(r"\b(?P<n>\d+|an?|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve)\s+(?:of the\s+)?(?:additional\s+)?(?:[a-z]+\d+\s+)?robots?\b")
            .expect("count pattern compiles")
    })
}

fn number_word(word: &str) -> Option<f64> {
    match word {
        "a" | "an" => Some(1.0),
        w => NUMBER_WORDS.iter().position(|n| *n == w).map(|n| n as f64).or_else(|| w.parse().ok()),
    }
}

/// Minutes denoted by a duration phrase such as "1.5 hours", "two and a
/// half hours", "half an hour" or "90 minutes".
pub(super) fn duration_minutes(phrase: &str) -> Option<Minutes> {
    let p = phrase.trim();
    let hours = match p {
        "half an hour" => 0.5,
        "a quarter of an hour" | "one quarter of an hour" => 0.25,
        "three quarters of an hour" => 0.75,
        "an hour and a half" | "a hour and a half" => 1.5,
        _ => {
            let (amount, unit) = p.rsplit_once(' ')?;
            let (amount, half) = match amount.strip_suffix(" and a half") {
                Some(a) => (a, 0.5),
                None => (amount, 0.0),
            };
            let n = number_word(amount)? + half;
            if unit.starts_with("hour") {
                n
            } else if unit.starts_with("min") {
                n / 60.0
            } else {
                return None;
            }
        }
    };
    Some((hours * 60.0).round() as Minutes)
}

#[derive(Debug)]
struct Hit {
    start: usize,
    end: usize,
    trigger: Trigger,
    minutes: Option<Minutes>,
}

fn scan_triggers(lower: &str) -> Vec<Hit> {
    let mut hits: Vec<Hit> = Vec::new();
    for (trigger, re) in compiled() {
        for caps in re.captures_iter(lower) {
            let whole = caps.get(0).expect("group 0");
            let minutes = match caps.name("u").map(|u| u.as_str()) {
                Some("half past the hour") => Some(30),
                Some("a quarter past the hour") => Some(15),
                _ => caps.name("d").and_then(|d| duration_minutes(d.as_str())),
            };
            hits.push(Hit { start: whole.start(), end: whole.end(), trigger: *trigger, minutes });
        }
    }
    hits.sort_by_key(|h| (h.start, std::cmp::Reverse(h.end)));
    let mut kept: Vec<Hit> = Vec::new();
    for h in hits {
        if kept.last().is_none_or(|k| h.start >= k.end) {
            kept.push(h);
        }
    }
    kept
}

/// Extracts deltas from a narrative using the template family above.
/// Every returned delta is valid against the knowledge base's instance.
pub fn rule_parse(narrative: &str, kb: &TaskKnowledgeBase) -> Result<Vec<ConstraintDelta>, NarrativeError> {
    let lower = narrative.to_ascii_lowercase();
    let mentions = kb.task_mentions(narrative)?;
    let id = |m: &Mention| kb.tasks[m.task].id.clone();
    let unresolved = |phrase: &str, reason: &str| NarrativeError::UnresolvedReference {
        phrase: phrase.trim().to_string(),
        reason: reason.to_string(),
    };

    let mut deltas = Vec::new();
    let mut seg_start = 0;
    for hit in scan_triggers(&lower) {
        let phrase = &narrative[hit.start..hit.end];
        let in_segment: Vec<&Mention> =
            mentions.iter().filter(|m| m.start >= seg_start && m.end <= hit.start).collect();
        let before = || {
            in_segment
                .last()
                .copied()
                .or_else(|| mentions.iter().rev().find(|m| m.end <= hit.start))
                .ok_or_else(|| unresolved(phrase, "no task is named before it"))
        };
        let after = || {
            mentions
                .iter()
                .find(|m| m.start >= hit.end)
                .ok_or_else(|| unresolved(phrase, "no task is named after it"))
        };
        let mut consumed = hit.end;
        let delta = match hit.trigger {
            Trigger::Duration | Trigger::Shift(_) | Trigger::Until => {
                let task = id(before()?);
                let minutes = hit.minutes.ok_or_else(|| unresolved(phrase, "unreadable duration"))?;
                match hit.trigger {
                    Trigger::Duration => ConstraintDelta::Duration { task, minutes },
                    Trigger::Shift(sign) => ConstraintDelta::StartTime { task, shift: sign * minutes },
                    _ => ConstraintDelta::StartTime { task, shift: minutes },
                }
            }
            Trigger::Precedes(sign) | Trigger::Follows(sign) => {
                let (left, right) = (before()?, after()?);
                consumed = right.end;
                let (a, b) = if matches!(hit.trigger, Trigger::Precedes(_)) { (left, right) } else { (right, left) };
                ConstraintDelta::Dependency { task: id(a), successor: id(b), sign }
            }
            Trigger::ConflictWith => {
                let (left, right) = (before()?, after()?);
                consumed = right.end;
                ConstraintDelta::Conflict { first: id(left), second: id(right) }
            }
            Trigger::ConflictPair => match in_segment.as_slice() {
                [.., a, b] => ConstraintDelta::Conflict { first: id(a), second: id(b) },
                _ => return Err(unresolved(phrase, "needs two tasks named before it")),
            },
            Trigger::Robots(sign) => {
                let segment = &lower[seg_start..hit.start];
                let count = count_regex().captures_iter(segment).last();
                let region_start = seg_start + count.as_ref().map_or(0, |c| c.get(0).expect("group 0").start());
                let region = &narrative[region_start..hit.start];
                let n = match &count {
                    Some(c) => number_word(&c["n"]).filter(|n| n.fract() == 0.0 && *n > 0.0).map(|n| n as i64),
                    None => None,
                }
                .ok_or_else(|| unresolved(region, "no robot count is given"))?;
                let mut literal: Vec<String> = kb.robot_ids_in(region).into_iter().map(|(_, id)| id).collect();
                literal.dedup();
                let robot_type = match literal.as_slice() {
                    [one] => one.clone(),
                    [] => kb.robot_for_capabilities(&kb.capabilities_in(region), region)?,
                    _ => return Err(unresolved(region, "names more than one robot type")),
                };
                ConstraintDelta::RobotCount { robot_type, change: sign * n }
            }
        };
        delta.validate(kb.instance()).map_err(|e| unresolved(phrase, &e.to_string()))?;
        deltas.push(delta);
        seg_start = consumed;
    }
    Ok(deltas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narrative::prompt::worked_examples;
    use ConstraintDelta::*;

    fn parse(text: &str) -> Vec<ConstraintDelta> {
        rule_parse(text, &TaskKnowledgeBase::case_study()).unwrap()
    }

    #[test]
    fn durations() {
        for (p, m) in [
            ("1.5 hours", 90),
            ("two and a half hours", 150),
            ("an hour", 60),
            ("half an hour", 30),
            ("90 minutes", 90),
            ("three quarters of an hour", 45),
            ("an hour and a half", 90),
            ("2 hours", 120),
        ] {
            assert_eq!(duration_minutes(p), Some(m), "{p}");
        }
    }

    #[test]
    fn worked_examples_parse_to_their_outputs() {
        for (text, gold) in worked_examples() {
            assert_eq!(parse(text), gold, "{text}");
        }
    }

    #[test]
    fn short_phrases() {
        assert_eq!(parse("wall painting takes 1.5 hours instead of 1 hour"), [Duration { task: "T13".into(), minutes: 90 }]);
        assert_eq!(
            parse("The worker assigned to install the HVAC duct quit, but another worker who can arrive in 150 minutes was found."),
            [StartTime { task: "T11".into(), shift: 150 }]
        );
        assert_eq!(
            parse("The wall-drilling worker will be arriving an hour late."),
            [StartTime { task: "T6".into(), shift: 60 }]
        );
        assert_eq!(
            parse("Duct structural materials delayed until half past the hour."),
            [StartTime { task: "T4".into(), shift: 30 }]
        );
        assert!(parse("").is_empty());
        assert!(parse("Nothing changed today.").is_empty());
    }

    #[test]
    fn ordering_and_conflicts() {
        assert_eq!(
            parse("Wall painting must be completed before window installation can begin."),
            [Dependency { task: "T13".into(), successor: "T9".into(), sign: DependencySign::Add }]
        );
        assert_eq!(
            parse("Window installation no longer needs to wait for moving the windows."),
            [Dependency { task: "T3".into(), successor: "T9".into(), sign: DependencySign::Remove }]
        );
        assert_eq!(
            parse("Wall drilling and duct framing cannot run at the same time."),
            [Conflict { first: "T6".into(), second: "T10".into() }]
        );
    }

    #[test]
    fn robots() {
        assert_eq!(
            parse("Two additional robots with cargo containers have just arrived on site."),
            [RobotCount { robot_type: "R1".into(), change: 2 }]
        );
        assert_eq!(parse("One R3 robot has broken down."), [RobotCount { robot_type: "R3".into(), change: -1 }]);
    }

    #[test]
    fn unresolvable_references_are_errors() {
        let kb = TaskKnowledgeBase::case_study();
        let err = rule_parse("A robot with a high-payload arm is out of service.", &kb).unwrap_err();
        assert!(matches!(err, NarrativeError::UnresolvedReference { .. }), "{err}");
        let err = rule_parse("It takes 2 hours.", &kb).unwrap_err();
        assert!(matches!(err, NarrativeError::UnresolvedReference { ref phrase, .. } if phrase == "takes 2 hours"));
    }
}
