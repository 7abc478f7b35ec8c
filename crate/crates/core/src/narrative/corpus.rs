//! Seeded narrative corpus with gold deltas.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{ConstraintDelta, DependencySign, Minutes};

use super::kb::TaskKnowledgeBase;
use super::metrics::ExtractionRecord;
use super::parse::{Trigger, FAMILIES, NUMBER_WORDS};

const HEDGES: &[&str] = &[
    "",
    "due to how things are unfolding on-site, ",
    "recent developments suggest that ",
    "after coordinating with field staff, it seems that ",
    "according to the site supervisor, ",
    "it appears that ",
];

const CONNECTORS: &[&str] = &[
    ", and in light of recent discussions, ",
    ". Additionally, ",
    ", followed by further refinements as ",
    "; meanwhile, ",
    ". In addition, ",
];

/// Phrases usable as the subject of a clause for each task.
fn task_phrases(kb: &TaskKnowledgeBase) -> Vec<Vec<String>> {
    kb.tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let verbal = |a: &str| {
                a.contains(" will ") || ["install ", "drill ", "paint ", "move "].iter().any(|v| a.starts_with(v))
            };
            std::iter::once(format!("the {} task", t.description))
                .chain(t.aliases.iter().skip(1).filter(|a| !verbal(a)).cloned())
                .filter(|p| kb.task_mentions(p).is_ok_and(|m| m.len() == 1 && m[0].task == i))
                .collect()
        })
        .collect()
}

fn topological_order(kb: &TaskKnowledgeBase) -> Vec<usize> {
    let tasks = &kb.instance().tasks;
    let mut placed = vec![false; tasks.len()];
    let mut order = Vec::with_capacity(tasks.len());
    while order.len() < tasks.len() {
        let before = order.len();
        for (i, t) in tasks.iter().enumerate() {
            if !placed[i] && t.predecessors.iter().all(|p| kb.task_index(p).is_none_or(|j| placed[j])) {
                placed[i] = true;
                order.push(i);
            }
        }
        if order.len() == before {
            // A cycle; keep the rest in index order.
            order.extend((0..tasks.len()).filter(|&i| !placed[i]));
            break;
        }
    }
    order
}

fn render_duration(minutes: Minutes, rng: &mut ChaCha8Rng) -> String {
    let plural = |n: i64, unit: &str| if n == 1 { unit.to_string() } else { format!("{unit}s") };
    let word = |n: i64| NUMBER_WORDS.get(n as usize).map_or_else(|| n.to_string(), |w| w.to_string());
    let mut forms = vec![format!("{minutes} minutes")];
    if minutes % 60 == 0 {
        let h = minutes / 60;
        forms.push(format!("{h} {}", plural(h, "hour")));
        forms.push(format!("{} {}", word(h), plural(h, "hour")));
        if h == 1 {
            forms.push("an hour".into());
        }
    } else if minutes % 30 == 0 {
        let h = minutes / 60;
        forms.push(format!("{} hours", minutes as f64 / 60.0));
        forms.push(if h == 0 { "half an hour".into() } else { format!("{} and a half hours", word(h)) });
        if h == 1 {
            forms.push("an hour and a half".into());
        }
    } else if minutes == 15 {
        forms.push("a quarter of an hour".into());
    } else if minutes == 45 {
        forms.push("three quarters of an hour".into());
    }
    forms.choose(rng).expect("non-empty").clone()
}

fn join_phrases(parts: &[&str]) -> String {
    match parts {
        [] => String::new(),
        [one] => one.to_string(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

struct Drawn {
    delta: ConstraintDelta,
    trigger: Trigger,
    slots: Vec<(&'static str, String)>,
}

struct Generator<'a> {
    kb: &'a TaskKnowledgeBase,
    phrases: Vec<Vec<String>>,
    order: Vec<usize>,
    edges: Vec<(usize, usize)>,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn task(&mut self, i: usize) -> String {
        let options = &self.phrases[i];
        options[self.rng.gen_range(0..options.len())].clone()
    }

    fn robots(&mut self, t: usize, n: i64, adding: bool) -> Vec<(&'static str, String)> {
        let kb = self.kb;
        let robot = &kb.robots[t];
        let caps: Vec<usize> =
            robot.capabilities.iter().filter_map(|c| kb.capabilities.iter().position(|k| k == c)).collect();
        let by_caps = kb.robot_for_capabilities(&caps.iter().copied().collect(), "").is_ok_and(|id| id == robot.id);
        let count = match (n, adding) {
            (1, false) => ["one of the", "a"].choose(&mut self.rng).expect("non-empty").to_string(),
            (1, true) => "an additional".into(),
            (n, false) => NUMBER_WORDS[n as usize].into(),
            (n, true) => format!("{} additional", NUMBER_WORDS[n as usize]),
        };
        let noun = match (n, count.as_str()) {
            (1, "one of the") => "robots",
            (1, _) => "robot",
            _ => "robots",
        };
        let phrase = if by_caps && !caps.is_empty() {
            let picked: Vec<&str> = caps
                .iter()
                .map(|&k| *kb.capability_phrases(k).choose(&mut self.rng).expect("capability has a phrase"))
                .collect();
            format!("{count} {noun} with {}", join_phrases(&picked))
        } else {
            format!("{count} {} {noun}", robot.id)
        };
        let single = n == 1;
        vec![
            ("robots", phrase),
            ("is", if single { "is" } else { "are" }.into()),
            ("was", if single { "was" } else { "were" }.into()),
            ("has", if single { "has" } else { "have" }.into()),
        ]
    }

    fn draw(&mut self) -> Drawn {
        let kb = self.kb;
        let n_tasks = kb.tasks.len();
        loop {
            match self.rng.gen_range(0..5) {
                0 => {
                    let remove = !self.edges.is_empty() && self.rng.gen_bool(0.5);
                    let (a, b, sign) = if remove {
                        let (a, b) = *self.edges.choose(&mut self.rng).expect("non-empty");
                        (a, b, DependencySign::Remove)
                    } else {
                        if n_tasks < 2 {
                            continue;
                        }
                        let i = self.rng.gen_range(0..n_tasks - 1);
                        let j = self.rng.gen_range(i + 1..n_tasks);
                        let (a, b) = (self.order[i], self.order[j]);
                        if self.edges.contains(&(a, b)) {
                            continue;
                        }
                        (a, b, DependencySign::Add)
                    };
                    let trigger = if self.rng.gen_bool(0.5) { Trigger::Precedes(sign) } else { Trigger::Follows(sign) };
                    let (pa, pb) = (self.task(a), self.task(b));
                    return Drawn {
                        delta: ConstraintDelta::Dependency { task: kb.tasks[a].id.clone(), successor: kb.tasks[b].id.clone(), sign },
                        trigger,
                        slots: vec![("a", pa), ("b", pb)],
                    };
                }
                1 => {
                    let i = self.rng.gen_range(0..n_tasks);
                    let minutes = 15 * self.rng.gen_range(1..=16);
                    let (task, dur, old) = (self.task(i), render_duration(minutes, &mut self.rng), render_duration(kb.tasks[i].duration, &mut self.rng));
                    return Drawn {
                        delta: ConstraintDelta::Duration { task: kb.tasks[i].id.clone(), minutes },
                        trigger: Trigger::Duration,
                        slots: vec![("task", task), ("dur", dur), ("old", old)],
                    };
                }
                2 => {
                    let i = self.rng.gen_range(0..n_tasks);
                    let sign = if self.rng.gen_bool(0.7) { 1 } else { -1 };
                    let minutes = 15 * self.rng.gen_range(1..=12);
                    let (task, dur) = (self.task(i), render_duration(minutes, &mut self.rng));
                    return Drawn {
                        delta: ConstraintDelta::StartTime { task: kb.tasks[i].id.clone(), shift: sign * minutes },
                        trigger: Trigger::Shift(sign),
                        slots: vec![("task", task), ("dur", dur)],
                    };
                }
                3 => {
                    if kb.robots.is_empty() {
                        continue;
                    }
                    let t = self.rng.gen_range(0..kb.robots.len());
                    let sign = if self.rng.gen_bool(0.6) { -1 } else { 1 };
                    let n = self.rng.gen_range(1..=3);
                    let slots = self.robots(t, n, sign > 0);
                    return Drawn {
                        delta: ConstraintDelta::RobotCount { robot_type: kb.robots[t].id.clone(), change: sign * n },
                        trigger: Trigger::Robots(sign),
                        slots,
                    };
                }
                _ => {
                    if n_tasks < 2 {
                        continue;
                    }
                    let a = self.rng.gen_range(0..n_tasks);
                    let b = (a + self.rng.gen_range(1..n_tasks)) % n_tasks;
                    let trigger = if self.rng.gen_bool(0.5) { Trigger::ConflictPair } else { Trigger::ConflictWith };
                    let (pa, pb) = (self.task(a), self.task(b));
                    return Drawn {
                        delta: ConstraintDelta::Conflict { first: kb.tasks[a].id.clone(), second: kb.tasks[b].id.clone() },
                        trigger,
                        slots: vec![("a", pa), ("b", pb)],
                    };
                }
            }
        }
    }

    fn clause(&mut self, drawn: &Drawn) -> String {
        let templates: Vec<&str> = FAMILIES
            .iter()
            .filter(|f| f.trigger == drawn.trigger)
            .flat_map(|f| f.clauses.iter().copied())
            .collect();
        let mut text = templates.choose(&mut self.rng).expect("every drawn trigger has clauses").to_string();
        for (name, value) in &drawn.slots {
            text = text.replace(&format!("{{{name}}}"), value);
        }
        text
    }

    fn narrative(&mut self, deltas: usize) -> (String, Vec<ConstraintDelta>) {
        let mut text = HEDGES.choose(&mut self.rng).expect("non-empty").to_string();
        let mut gold = Vec::with_capacity(deltas);
        for k in 0..deltas {
            if k > 0 {
                text.push_str(CONNECTORS.choose(&mut self.rng).expect("non-empty"));
                if self.rng.gen_bool(0.3) {
                    text.push_str(HEDGES.choose(&mut self.rng).expect("non-empty"));
                }
            }
            let drawn = self.draw();
            text.push_str(&self.clause(&drawn));
            gold.push(drawn.delta);
        }
        text.push('.');
        let mut chars = text.chars();
        (chars.next().map_or_else(String::new, |f| f.to_uppercase().chain(chars).collect()), gold)
    }
}

/// `groups × per_group` records; group g holds narratives with exactly g
/// deltas. The same seed always gives the same corpus.
pub fn generate_corpus(kb: &TaskKnowledgeBase, seed: u64, groups: usize, per_group: usize) -> Vec<ExtractionRecord> {
    let edges = kb
        .instance()
        .tasks
        .iter()
        .enumerate()
        .flat_map(|(b, t)| t.predecessors.iter().filter_map(move |p| kb.task_index(p).map(|a| (a, b))))
        .collect();
    let mut generator = Generator {
        kb,
        phrases: task_phrases(kb),
        order: topological_order(kb),
        edges,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let mut records = Vec::with_capacity(groups * per_group);
    for g in 1..=groups {
        for _ in 0..per_group {
            let (narrative, gold) = generator.narrative(g);
            records.push(ExtractionRecord { narrative, gold, predicted: Vec::new(), model: String::new(), latency_ms: 0 });
        }
    }
    records
}
