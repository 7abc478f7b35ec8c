//! Random small instances and brute-force oracles.

#![allow(dead_code)]

use forecrew::model::{
    validate_instance, Capability, ConstraintDelta, ObjectiveWeights, Plan, ProblemInstance, RobotType, Task, TimeWindow,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Shape {
    pub min_tasks: usize,
    pub max_tasks: usize,
    pub max_units: u32,
    pub max_duration: i64,
    pub windows: bool,
    pub conflicts: bool,
}

pub const SOLVER_SHAPE: Shape = Shape { min_tasks: 1, max_tasks: 5, max_units: 3, max_duration: 6, windows: true, conflicts: true };
pub const REPLAN_SHAPE: Shape = Shape { min_tasks: 3, max_tasks: 4, max_units: 3, max_duration: 3, windows: false, conflicts: true };

/// A random admissible instance with at most `max_tasks` tasks and
/// `max_units` robot units over two capabilities.
pub fn random_instance(seed: u64, shape: &Shape) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n_types = rng.gen_range(1..=3usize);
        let mut left = rng.gen_range(1..=shape.max_units);
        let mut robot_types = Vec::new();
        for t in 0..n_types {
            let count = if t + 1 == n_types { left } else { rng.gen_range(0..=left) };
            left -= count;
            robot_types.push(RobotType {
                id: format!("R{}", t + 1),
                capabilities: vec![rng.gen_range(0..=2), rng.gen_range(0..=1)],
                count,
            });
        }
        let n = rng.gen_range(shape.min_tasks..=shape.max_tasks);
        let mut tasks = Vec::new();
        for i in 0..n {
            let predecessors = (0..i)
                .filter(|_| rng.gen_bool(0.3))
                .map(|j| format!("T{}", j + 1))
                .collect();
            let window = (shape.windows && rng.gen_bool(0.2)).then(|| TimeWindow {
                earliest_start: rng.gen_range(1..=6),
                latest_end: None,
            });
            tasks.push(Task {
                id: format!("T{}", i + 1),
                description: String::new(),
                duration: rng.gen_range(1..=shape.max_duration),
                requirements: vec![rng.gen_range(0..=2), rng.gen_range(0..=1)],
                predecessors,
                window,
                aliases: vec![],
            });
        }
        let mut conflicts = Vec::new();
        if shape.conflicts {
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(0.15) {
                        conflicts.push((format!("T{}", i + 1), format!("T{}", j + 1)));
                    }
                }
            }
        }
        let inst = ProblemInstance {
            capabilities: vec![
                Capability { id: 0, name: "lift".into() },
                Capability { id: 1, name: "grip".into() },
            ],
            robot_types,
            tasks,
            conflicts,
            weights: ObjectiveWeights { makespan: 100, ..ObjectiveWeights::default() },
            horizon: None,
        };
        if validate_instance(&inst).is_empty() {
            return inst;
        }
    }
}

struct Flat {
    n: usize,
    dur: Vec<i64>,
    release: Vec<i64>,
    preds: Vec<Vec<usize>>,
    conflict: Vec<Vec<bool>>,
    /// Covering unit sets per task as bitmasks.
    teams: Vec<Vec<u32>>,
    unit_ids: Vec<String>,
}

fn covers(inst: &ProblemInstance, unit_types: &[usize], task: &Task, mask: u32) -> bool {
    if mask == 0 {
        return false;
    }
    task.requirements.iter().enumerate().all(|(k, &b)| {
        let have: u32 = (0..unit_types.len())
            .filter(|u| mask >> u & 1 == 1)
            .map(|u| inst.robot_types[unit_types[u]].capabilities[k])
            .sum();
        have >= b
    })
}

fn flatten(inst: &ProblemInstance, minimal_only: bool) -> Flat {
    let units = inst.robot_units();
    let unit_types: Vec<usize> = units.iter().map(|u| u.type_index).collect();
    let n = inst.tasks.len();
    let idx = |id: &str| inst.task_index(id).unwrap();
    let teams = inst
        .tasks
        .iter()
        .map(|t| {
            (1u32..1 << units.len())
                .filter(|&m| covers(inst, &unit_types, t, m))
                .filter(|&m| {
                    !minimal_only
                        || (0..units.len()).filter(|u| m >> u & 1 == 1).all(|u| !covers(inst, &unit_types, t, m & !(1 << u)))
                })
                .collect()
        })
        .collect();
    let mut conflict = vec![vec![false; n]; n];
    for (a, b) in &inst.conflicts {
        conflict[idx(a)][idx(b)] = true;
        conflict[idx(b)][idx(a)] = true;
    }
    Flat {
        n,
        dur: inst.tasks.iter().map(|t| t.duration).collect(),
        release: inst.tasks.iter().map(|t| t.earliest_start()).collect(),
        preds: inst.tasks.iter().map(|t| t.predecessors.iter().map(|p| idx(p)).collect()).collect(),
        conflict,
        teams,
        unit_ids: units.into_iter().map(|u| u.id).collect(),
    }
}

fn overlaps(a: i64, da: i64, b: i64, db: i64) -> bool {
    a < b + db && b < a + da
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum of makespan·C_m + Σ end·C_s + Σ team size·C_r over every
/// choice of minimal covering unit set per task and every priority list,
/// each task placed at its earliest feasible time with gap insertion.
pub fn oracle_solve(inst: &ProblemInstance) -> Option<i64> {
    let f = flatten(inst, true);
    let w = inst.weights;
    let horizon = inst.horizon();
    let perms: Vec<Vec<usize>> = permutations(f.n)
        .into_iter()
        .filter(|p| (0..p.len()).all(|k| f.preds[p[k]].iter().all(|q| p[..k].contains(q))))
        .collect();
    let mut best: Option<i64> = None;
    let mut choice = vec![0usize; f.n];
    loop {
        let masks: Vec<u32> = (0..f.n).map(|i| f.teams[i][choice[i]]).collect();
        for perm in &perms {
            let mut start = vec![0i64; f.n];
            let mut done: Vec<usize> = Vec::new();
            let mut ok = true;
            for &i in perm {
                let mut s = f.release[i];
                for &p in &f.preds[i] {
                    s = s.max(start[p] + f.dur[p]);
                }
                // Earliest gap: candidates are s and every end of a placed task.
                let mut cands: Vec<i64> = std::iter::once(s)
                    .chain(done.iter().map(|&j| start[j] + f.dur[j]).filter(|&e| e > s))
                    .collect();
                cands.sort_unstable();
                let placed = cands.into_iter().find(|&t| {
                    done.iter().all(|&j| {
                        let clash = masks[i] & masks[j] != 0 || f.conflict[i][j];
                        !clash || !overlaps(t, f.dur[i], start[j], f.dur[j])
                    })
                });
                match placed {
                    Some(t) if t + f.dur[i] <= horizon => start[i] = t,
                    _ => {
                        ok = false;
                        break;
                    }
                }
                done.push(i);
            }
            if !ok {
                continue;
            }
            let ends: Vec<i64> = (0..f.n).map(|i| start[i] + f.dur[i]).collect();
            let size: i64 = masks.iter().map(|m| m.count_ones() as i64).sum();
            let value = w.makespan * ends.iter().copied().max().unwrap_or(0)
                + w.completion * ends.iter().sum::<i64>()
                + w.robots * size;
            best = Some(best.map_or(value, |b: i64| b.min(value)));
        }
        let mut k = 0;
        loop {
            if k == f.n {
                return best.or(if f.n == 0 { Some(0) } else { None });
            }
            choice[k] += 1;
            if choice[k] < f.teams[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

/// Minimum replanning objective with the started tasks pinned, found by
/// trying every covering unit set and every integer start in
/// `[at, horizon]` for the remaining tasks.
pub fn oracle_replan(inst: &ProblemInstance, original: &Plan, at: i64, horizon: i64) -> Option<i64> {
    let f = flatten(inst, false);
    let w = inst.weights;
    let unit_mask = |robots: &[String]| -> u32 {
        robots
            .iter()
            .filter_map(|r| f.unit_ids.iter().position(|u| u == r))
            .fold(0, |m, u| m | 1 << u)
    };
    let ghosts = |robots: &[String]| robots.iter().filter(|r| !f.unit_ids.contains(r)).count() as i64;

    let mut start = vec![0i64; f.n];
    let mut mask = vec![0u32; f.n];
    let mut fixed = vec![false; f.n];
    let mut base = 0i64;
    let mut future = Vec::new();
    for (i, task) in inst.tasks.iter().enumerate() {
        let e = original.entry(&task.id).unwrap();
        if e.start <= at {
            fixed[i] = true;
            start[i] = e.start;
            mask[i] = unit_mask(&e.robots);
            base += w.completion * e.end + w.robots * e.robots.len() as i64;
        } else {
            future.push(i);
            base += w.reassignment * ghosts(&e.robots);
        }
    }

    struct Ctx<'a> {
        f: &'a Flat,
        inst: &'a ProblemInstance,
        original: &'a Plan,
        future: Vec<usize>,
        at: i64,
        horizon: i64,
        best: Option<i64>,
    }
    fn rec(c: &mut Ctx, k: usize, start: &mut Vec<i64>, mask: &mut Vec<u32>, placed: &mut Vec<bool>, acc: i64) {
        let f = c.f;
        let w = c.inst.weights;
        if k == c.future.len() {
            let mk = (0..f.n).map(|i| start[i] + f.dur[i]).max().unwrap_or(0);
            let value = acc + w.makespan * mk;
            c.best = Some(c.best.map_or(value, |b| b.min(value)));
            return;
        }
        let i = c.future[k];
        let e0 = c.original.entry(&c.inst.tasks[i].id).unwrap();
        let orig_mask = e0.robots.iter().filter_map(|r| f.unit_ids.iter().position(|u| u == r)).fold(0u32, |m, u| m | 1 << u);
        for &m in &f.teams[i] {
            for s in c.at.max(f.release[i])..=c.horizon - f.dur[i] {
                let ok = (0..f.n).filter(|&j| placed[j]).all(|j| {
                    let clash = m & mask[j] != 0 || f.conflict[i][j];
                    (!clash || !overlaps(s, f.dur[i], start[j], f.dur[j]))
                        && (!f.preds[i].contains(&j) || start[j] + f.dur[j] <= s)
                        && (!f.preds[j].contains(&i) || s + f.dur[i] <= start[j])
                });
                if !ok {
                    continue;
                }
                let e = s + f.dur[i];
                let cost = w.completion * e
                    + w.robots * m.count_ones() as i64
                    + w.reassignment * (m ^ orig_mask).count_ones() as i64
                    + w.retiming * ((s - e0.start).abs() + (e - e0.end).abs());
                start[i] = s;
                mask[i] = m;
                placed[i] = true;
                rec(c, k + 1, start, mask, placed, acc + cost);
                placed[i] = false;
            }
        }
    }

    // Pinned tasks must already be consistent among themselves.
    let mut placed = fixed.clone();
    let mut c = Ctx { f: &f, inst, original, future, at, horizon, best: None };
    rec(&mut c, 0, &mut start, &mut mask, &mut placed, base);
    c.best
}

/// A random delta on the future part of a plan, or none.
pub fn random_update(inst: &ProblemInstance, future: &[String], rng: &mut ChaCha8Rng) -> Vec<ConstraintDelta> {
    if future.is_empty() {
        return vec![];
    }
    let task = future[rng.gen_range(0..future.len())].clone();
    match rng.gen_range(1..5) {
        1 => vec![ConstraintDelta::Duration { task, minutes: rng.gen_range(1..=3) }],
        2 => vec![ConstraintDelta::StartTime { task, shift: rng.gen_range(1..=6) }],
        3 => {
            let other = inst.tasks[rng.gen_range(0..inst.tasks.len())].id.clone();
            if other == task {
                vec![]
            } else {
                vec![ConstraintDelta::Conflict { first: task, second: other }]
            }
        }
        _ => vec![ConstraintDelta::RobotCount {
            robot_type: inst.robot_types[rng.gen_range(0..inst.robot_types.len())].id.clone(),
            change: 1,
        }],
    }
}
