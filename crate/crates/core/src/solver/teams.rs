//! Minimal covering teams, expressed as robot-type multisets.

use crate::model::{ProblemInstance, Task};

/// `(type index, unit count)` pairs sorted by type index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TeamSpec {
    pub parts: Vec<(usize, u32)>,
}

impl TeamSpec {
    pub fn size(&self) -> u32 {
        self.parts.iter().map(|&(_, c)| c).sum()
    }

    pub fn uses_type(&self, type_index: usize) -> bool {
        self.parts.iter().any(|&(t, _)| t == type_index)
    }
}

fn covers(instance: &ProblemInstance, task: &Task, counts: &[u32]) -> bool {
    task.requirements.iter().enumerate().all(|(k, &need)| {
        let have: u64 = instance
            .robot_types
            .iter()
            .zip(counts)
            .map(|(rt, &c)| u64::from(rt.capabilities.get(k).copied().unwrap_or(0)) * u64::from(c))
            .sum();
        have >= u64::from(need)
    })
}

/// Every team (as a type multiset drawn from the available counts) that
/// covers the task's requirements and from which no single unit can be
/// removed. A task without requirements still needs one robot, so its
/// minimal teams are the single units of each available type.
pub fn minimal_teams(instance: &ProblemInstance, task: &Task) -> Vec<TeamSpec> {
    let n_types = instance.robot_types.len();
    if task.requirements.iter().all(|&b| b == 0) {
        return (0..n_types)
            .filter(|&t| instance.robot_types[t].count > 0)
            .map(|t| TeamSpec { parts: vec![(t, 1)] })
            .collect();
    }

    // A type only helps if it supplies something the task needs, and never
    // more units than it takes to cover its most demanding useful capability.
    let caps: Vec<u32> = (0..n_types)
        .map(|t| {
            let rt = &instance.robot_types[t];
            let useful = task
                .requirements
                .iter()
                .enumerate()
                .filter(|&(k, &b)| b > 0 && rt.capabilities.get(k).copied().unwrap_or(0) > 0)
                .map(|(k, &b)| b.div_ceil(rt.capabilities[k]))
                .max()
                .unwrap_or(0);
            useful.min(rt.count)
        })
        .collect();

    let mut out = Vec::new();
    let mut counts = vec![0u32; n_types];
    enumerate(instance, task, &caps, 0, &mut counts, &mut out);
    out.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
    out
}

fn enumerate(
    instance: &ProblemInstance,
    task: &Task,
    caps: &[u32],
    t: usize,
    counts: &mut Vec<u32>,
    out: &mut Vec<TeamSpec>,
) {
    if t == caps.len() {
        if counts.iter().all(|&c| c == 0) || !covers(instance, task, counts) {
            return;
        }
        let used: Vec<usize> = (0..counts.len()).filter(|&k| counts[k] > 0).collect();
        let minimal = used.into_iter().all(|k| {
            counts[k] -= 1;
            let still = covers(instance, task, counts);
            counts[k] += 1;
            !still
        });
        if minimal {
            out.push(TeamSpec {
                parts: counts
                    .iter()
                    .enumerate()
                    .filter(|&(_, &c)| c > 0)
                    .map(|(k, &c)| (k, c))
                    .collect(),
            });
        }
        return;
    }
    for c in 0..=caps[t] {
        counts[t] = c;
        enumerate(instance, task, caps, t + 1, counts, out);
    }
    counts[t] = 0;
}
