//! Depth-first branch and bound over a schedule-generation scheme.
//!
//! A node fixes a prefix of (task, team, start) decisions with start times
//! that never decrease along the prefix; ties between equal starts are
//! only explored in a fixed priority order. Every plan with a regular
//! objective can be left-shifted into one such sequence, so the scheme is
//! exact. When replanning, the deviation terms make the objective
//! non-regular: leaves are then re-timed optimally for their orderings.

use std::collections::HashMap;
use std::sync::atomic::Ordering;
use std::time::Instant;

use crate::model::{ObjectiveWeights, Plan, PlanEntry, SolveStats, SolveStatus};

use super::program::IntegerProgram;
use super::teams::TeamSpec;
use super::timing::TimingProblem;
use super::SolveLimits;

const TT_LIMIT: usize = 3_000_000;

#[derive(Debug, Clone)]
struct Pool {
    types: Vec<usize>,
    /// `(task, units of the pool it needs at least)`
    members: Vec<(usize, u32)>,
    unit_demand: bool,
}

#[derive(Debug, Clone)]
struct Frozen {
    start: i64,
    end: i64,
    units: Vec<usize>,
}

#[derive(Debug, Clone)]
struct ReplanData {
    at: i64,
    frozen: Vec<Option<Frozen>>,
    /// Original times of every task.
    orig: Vec<(i64, i64)>,
    /// Original team restricted to units that still exist and qualify.
    orig_units: Vec<Vec<usize>>,
    /// Original-team membership per unit, for symmetry detection.
    signature: Vec<Vec<usize>>,
    constant: i64,
}

struct Compiled {
    n: usize,
    dur: Vec<i64>,
    release: Vec<i64>,
    latest_end: Vec<i64>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    conflicts: Vec<Vec<usize>>,
    teams: Vec<Vec<TeamSpec>>,
    unit_type: Vec<usize>,
    type_units: Vec<Vec<usize>>,
    topo: Vec<usize>,
    tail: Vec<i64>,
    /// Static priority, longest remaining path first. Equal starts are
    /// only explored in increasing rank.
    rank: Vec<usize>,
    team_lb: Vec<i64>,
    pools: Vec<Pool>,
    /// Maximal sets of pairwise conflicting tasks; each behaves like one
    /// machine.
    cliques: Vec<Vec<usize>>,
    granularity: i64,
    w: ObjectiveWeights,
    replan: Option<ReplanData>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Compiled {
    fn new(program: &IntegerProgram) -> Self {
        let inst = &program.instance;
        let n = inst.tasks.len();
        let index = |id: &str| inst.task_index(id).expect("validated reference");
        let dur: Vec<i64> = inst.tasks.iter().map(|t| t.duration).collect();
        let release: Vec<i64> = inst.tasks.iter().map(|t| t.earliest_start()).collect();
        let latest_end: Vec<i64> = inst
            .tasks
            .iter()
            .map(|t| {
                t.window
                    .and_then(|w| w.latest_end)
                    .map_or(program.horizon, |e| e.min(program.horizon))
            })
            .collect();
        let preds: Vec<Vec<usize>> = inst
            .tasks
            .iter()
            .map(|t| t.predecessors.iter().map(|p| index(p)).collect())
            .collect();
        let mut succs = vec![Vec::new(); n];
        for (i, ps) in preds.iter().enumerate() {
            for &p in ps {
                succs[p].push(i);
            }
        }
        let mut conflicts = vec![Vec::new(); n];
        for (a, b) in &inst.conflicts {
            let (i, j) = (index(a), index(b));
            if !conflicts[i].contains(&j) {
                conflicts[i].push(j);
                conflicts[j].push(i);
            }
        }

        // Kahn order, smallest index first.
        let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            topo.push(i);
            for &s in &succs[i] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.insert(s);
                }
            }
        }
        let mut tail = vec![0; n];
        for &i in topo.iter().rev() {
            tail[i] = succs[i].iter().map(|&s| dur[s] + tail[s]).max().unwrap_or(0);
        }

        let mut by_priority: Vec<usize> = (0..n).collect();
        by_priority.sort_by_key(|&i| (std::cmp::Reverse(tail[i] + dur[i]), i));
        let mut rank = vec![0; n];
        for (r, &i) in by_priority.iter().enumerate() {
            rank[i] = r;
        }

        let unit_type: Vec<usize> = program.units.iter().map(|u| u.type_index).collect();
        let mut type_units = vec![Vec::new(); inst.robot_types.len()];
        for (u, &t) in unit_type.iter().enumerate() {
            type_units[t].push(u);
        }

        let w = inst.weights;
        let replan = program.replan.as_ref().map(|setup| {
            let unit_index = |id: &str| program.units.iter().position(|u| u.id == id);
            let mut frozen = vec![None; n];
            let mut orig = vec![(0, 0); n];
            let mut orig_units = vec![Vec::new(); n];
            let mut signature = vec![Vec::new(); program.units.len()];
            let mut constant = 0;
            for (i, task) in inst.tasks.iter().enumerate() {
                let entry = setup.original.entry(&task.id).expect("replan covers every task");
                orig[i] = (entry.start, entry.end);
                let units: Vec<usize> = entry
                    .robots
                    .iter()
                    .filter_map(|r| unit_index(r))
                    .filter(|&u| program.assignment_var(i, u).is_some())
                    .collect();
                if setup.frozen.contains(&task.id) {
                    constant += w.completion * entry.end + w.robots * units.len() as i64;
                    frozen[i] = Some(Frozen { start: entry.start, end: entry.end, units });
                } else {
                    constant += w.reassignment * (entry.robots.len() - units.len()) as i64;
                    for &u in &units {
                        signature[u].push(i);
                    }
                    orig_units[i] = units;
                }
            }
            ReplanData { at: setup.at, frozen, orig, orig_units, signature, constant }
        });

        let team_lb = (0..n)
            .map(|i| {
                program.teams[i]
                    .iter()
                    .map(|team_spec| {
                        let mut cost = w.robots * i64::from(team_spec.size());
                        if let Some(rp) = &replan {
                            // Per type, the symmetric difference with the
                            // original team is at least the count gap.
                            let mut diff = 0;
                            for t in 0..type_units.len() {
                                let k = team_spec.parts.iter().find(|p| p.0 == t).map_or(0, |p| p.1) as i64;
                                let o = rp.orig_units[i].iter().filter(|&&u| unit_type[u] == t).count() as i64;
                                diff += (k - o).abs();
                            }
                            cost += w.reassignment * diff;
                        }
                        cost
                    })
                    .min()
                    .unwrap_or(0)
            })
            .collect();

        let mut pools: Vec<Pool> = Vec::new();
        let mut candidates: Vec<Vec<usize>> = (0..type_units.len()).map(|t| vec![t]).collect();
        for specs in &program.teams {
            let mut types: Vec<usize> = specs.iter().flat_map(|s| s.parts.iter().map(|p| p.0)).collect();
            types.sort_unstable();
            types.dedup();
            if types.len() > 1 {
                candidates.push(types);
            }
        }
        candidates.sort();
        candidates.dedup();
        // Types shared between team alternatives couple their pools.
        let mut k = 0;
        while k < candidates.len() && candidates.len() < 64 {
            for j in 0..k {
                if candidates[j].iter().any(|t| candidates[k].contains(t)) {
                    let mut union = candidates[j].clone();
                    union.extend(candidates[k].iter().copied());
                    union.sort_unstable();
                    union.dedup();
                    if !candidates.contains(&union) {
                        candidates.push(union);
                    }
                }
            }
            k += 1;
        }
        for types in candidates {
            let members: Vec<(usize, u32)> = (0..n)
                .filter_map(|i| {
                    let need = program.teams[i]
                        .iter()
                        .map(|s| s.parts.iter().filter(|p| types.contains(&p.0)).map(|p| p.1).sum::<u32>())
                        .min()
                        .unwrap_or(0);
                    (need > 0).then_some((i, need))
                })
                .collect();
            if members.len() > 1 {
                let unit_demand = members.iter().all(|m| m.1 == 1);
                pools.push(Pool { types, members, unit_demand });
            }
        }

        let mut cliques: Vec<Vec<usize>> = Vec::new();
        for v in 0..n {
            if conflicts[v].is_empty() {
                continue;
            }
            let mut clique = vec![v];
            let mut others = conflicts[v].clone();
            others.sort_by_key(|&u| (std::cmp::Reverse(conflicts[u].len()), u));
            for u in others {
                if clique.iter().all(|c| conflicts[u].contains(c)) {
                    clique.push(u);
                }
            }
            clique.sort_unstable();
            if clique.len() > 1 && !cliques.contains(&clique) {
                cliques.push(clique);
            }
        }

        let granularity = if replan.is_some() {
            1
        } else {
            dur.iter()
                .chain(release.iter())
                .fold(0, |g, &v| gcd(g, v))
                .max(1)
        };

        Compiled {
            n,
            dur,
            release,
            latest_end,
            preds,
            succs,
            conflicts,
            teams: program.teams.clone(),
            unit_type,
            type_units,
            topo,
            tail,
            rank,
            team_lb,
            pools,
            cliques,
            granularity,
            w,
            replan,
        }
    }

    /// Smallest replanning cost of task `i` over starts `≥ head`,
    /// excluding the team terms.
    fn timing_floor(&self, i: usize, head: i64) -> i64 {
        let rp = self.replan.as_ref().expect("replan mode");
        let (s0, e0) = rp.orig[i];
        let d = self.dur[i];
        let f = |s: i64| self.w.completion * (s + d) + self.w.retiming * ((s - s0).abs() + (s + d - e0).abs());
        [head, s0.max(head), (e0 - d).max(head)].into_iter().map(f).min().unwrap()
    }

    fn team_cost(&self, i: usize, units: &[usize]) -> i64 {
        let mut cost = self.w.robots * units.len() as i64;
        if let Some(rp) = &self.replan {
            let orig = &rp.orig_units[i];
            let diff = units.iter().filter(|u| !orig.contains(u)).count()
                + orig.iter().filter(|u| !units.contains(u)).count();
            cost += self.w.reassignment * diff as i64;
        }
        cost
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    task: usize,
    start: i64,
    units: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Incumbent {
    objective: i64,
    start: Vec<i64>,
    units: Vec<Vec<usize>>,
}

struct Search<'a> {
    m: &'a Compiled,
    limits: &'a SolveLimits,
    began: Instant,
    nodes: u64,
    aborted: bool,
    best: Option<Incumbent>,
    gap_bound: i64,
    /// Smallest bound over subtrees left unexplored by an abort.
    open_bound: i64,
    placed: Vec<bool>,
    start: Vec<i64>,
    end: Vec<i64>,
    team: Vec<Vec<usize>>,
    pending: Vec<usize>,
    free: Vec<i64>,
    last_on: Vec<Option<usize>>,
    order: Vec<usize>,
    last_start: i64,
    last_task: Option<usize>,
    partial: i64,
    cur_max: i64,
    remaining: usize,
    table: HashMap<Vec<i64>, i64>,
}

impl<'a> Search<'a> {
    fn new(m: &'a Compiled, limits: &'a SolveLimits) -> Self {
        let n = m.n;
        let mut s = Search {
            m,
            limits,
            began: Instant::now(),
            nodes: 0,
            aborted: false,
            best: None,
            gap_bound: i64::MAX,
            open_bound: i64::MAX,
            placed: vec![false; n],
            start: vec![0; n],
            end: vec![0; n],
            team: vec![Vec::new(); n],
            pending: m.preds.iter().map(Vec::len).collect(),
            free: vec![0; m.unit_type.len()],
            last_on: vec![None; m.unit_type.len()],
            order: Vec::new(),
            last_start: 0,
            last_task: None,
            partial: 0,
            cur_max: 0,
            remaining: n,
            table: HashMap::new(),
        };
        if let Some(rp) = &m.replan {
            s.last_start = rp.at;
            s.partial = rp.constant;
            for i in 0..n {
                if let Some(f) = &rp.frozen[i] {
                    s.placed[i] = true;
                    s.start[i] = f.start;
                    s.end[i] = f.end;
                    s.team[i] = f.units.clone();
                    for &u in &f.units {
                        s.free[u] = s.free[u].max(f.end);
                    }
                    for &j in &m.succs[i] {
                        s.pending[j] -= 1;
                    }
                    s.cur_max = s.cur_max.max(f.end);
                    s.remaining -= 1;
                }
            }
        }
        s
    }

    fn out_of_budget(&mut self) -> bool {
        if self.aborted {
            return true;
        }
        if self.nodes >= self.limits.node_budget {
            self.aborted = true;
        } else if self.nodes.is_multiple_of(512) {
            let stopped = self.limits.stop.as_ref().is_some_and(|f| f.load(Ordering::Relaxed));
            if stopped || self.began.elapsed() >= self.limits.time_budget {
                self.aborted = true;
            }
        }
        self.aborted
    }

    fn sorted_free(&self) -> Vec<Vec<(i64, usize)>> {
        self.m
            .type_units
            .iter()
            .map(|units| {
                let mut v: Vec<(i64, usize)> =
                    units.iter().map(|&u| (self.free[u].max(self.last_start), u)).collect();
                v.sort_unstable();
                v
            })
            .collect()
    }

    fn base_start(&self, i: usize) -> i64 {
        let m = self.m;
        let mut b = self.last_start.max(m.release[i]);
        for &p in &m.preds[i] {
            b = b.max(self.end[p]);
        }
        for &c in &m.conflicts[i] {
            if self.placed[c] {
                b = b.max(self.end[c]);
            }
        }
        b
    }

    /// Unit sets for one team. Outside replanning the earliest-free
    /// units dominate; when replanning unit identity matters, so every
    /// combination is produced up to interchangeable units.
    fn unit_choices(&self, team_spec: &TeamSpec, sorted: &[Vec<(i64, usize)>]) -> Vec<Vec<usize>> {
        let mut choices: Vec<Vec<usize>> = vec![Vec::new()];
        for &(t, k) in &team_spec.parts {
            let k = k as usize;
            let avail = &sorted[t];
            if avail.len() < k {
                return Vec::new();
            }
            let per_type: Vec<Vec<usize>> = if self.m.replan.is_none() {
                vec![avail[..k].iter().map(|p| p.1).collect()]
            } else {
                let mut keyed: Vec<(UnitKey, usize)> = avail.iter().map(|&(_, u)| (self.unit_key(u), u)).collect();
                keyed.sort();
                let mut out = Vec::new();
                combos(&keyed, k, 0, &mut Vec::new(), &mut out);
                out
            };
            choices = choices
                .iter()
                .flat_map(|prefix| {
                    per_type.iter().map(move |c| {
                        let mut v = prefix.clone();
                        v.extend_from_slice(c);
                        v
                    })
                })
                .collect();
        }
        for c in &mut choices {
            c.sort_unstable();
        }
        choices
    }

    fn unit_key(&self, u: usize) -> UnitKey {
        let m = self.m;
        let rp = m.replan.as_ref().expect("replan mode");
        let anchor = match self.last_on[u] {
            Some(task) => (1, task as i64),
            None => (0, self.free[u].max(rp.at)),
        };
        (anchor, rp.signature[u].clone())
    }

    fn candidates(&self) -> Vec<Candidate> {
        let m = self.m;
        let sorted = self.sorted_free();
        let mut out = Vec::new();
        for i in 0..m.n {
            if self.placed[i] || self.pending[i] > 0 {
                continue;
            }
            let base = self.base_start(i);
            for team_spec in &m.teams[i] {
                for units in self.unit_choices(team_spec, &sorted) {
                    let s = units.iter().fold(base, |s, &u| s.max(self.free[u]));
                    if s == self.last_start && self.last_task.is_some_and(|l| m.rank[i] < m.rank[l]) {
                        continue;
                    }
                    if s + m.dur[i] > m.latest_end[i] {
                        continue;
                    }
                    out.push(Candidate { task: i, start: s, units });
                }
            }
        }
        out.sort_by(|a, b| {
            a.start
                .cmp(&b.start)
                .then_with(|| m.rank[a.task].cmp(&m.rank[b.task]))
                .then_with(|| a.units.len().cmp(&b.units.len()))
                .then_with(|| a.units.cmp(&b.units))
        });
        out
    }

    /// Lower bound on any completion of the current node, or `None` when
    /// the node cannot be completed.
    fn bound(&self) -> Option<i64> {
        let m = self.m;
        let sorted = self.sorted_free();
        let mut head = vec![0i64; m.n];
        let mut makespan = self.cur_max;
        let mut sum_end = 0i64;
        let mut rest = 0i64;
        for &i in &m.topo {
            if self.placed[i] {
                continue;
            }
            let mut h = self.last_start.max(m.release[i]);
            for &p in &m.preds[i] {
                h = h.max(if self.placed[p] { self.end[p] } else { head[p] + m.dur[p] });
            }
            for &c in &m.conflicts[i] {
                if self.placed[c] {
                    h = h.max(self.end[c]);
                }
            }
            let avail = m.teams[i]
                .iter()
                .filter_map(|team_spec| {
                    team_spec.parts
                        .iter()
                        .map(|&(t, k)| sorted[t].get(k as usize - 1).map(|p| p.0))
                        .try_fold(i64::MIN, |acc, f| f.map(|f| acc.max(f)))
                })
                .min()?;
            h = h.max(avail);
            if h + m.dur[i] > m.latest_end[i] {
                return None;
            }
            head[i] = h;
            makespan = makespan.max(h + m.dur[i] + m.tail[i]);
            sum_end += h + m.dur[i];
            rest += m.team_lb[i];
            if m.replan.is_some() {
                rest += m.timing_floor(i, h);
            }
        }

        let mut spt_best = 0i64;
        for pool in &m.pools {
            let members: Vec<(usize, u32)> =
                pool.members.iter().copied().filter(|&(i, _)| !self.placed[i]).collect();
            if members.is_empty() {
                continue;
            }
            let mut frees: Vec<i64> = pool.types.iter().flat_map(|&t| sorted[t].iter().map(|p| p.0)).collect();
            frees.sort_unstable();
            if frees.is_empty() {
                return None;
            }
            if pool.unit_demand {
                let mut heads: Vec<i64> = members.iter().map(|&(i, _)| head[i]).collect();
                let mut tails: Vec<i64> = members.iter().map(|&(i, _)| m.tail[i]).collect();
                heads.sort_unstable();
                tails.sort_unstable();
                let energy: i64 = members.iter().map(|&(i, _)| m.dur[i]).sum();
                let (mut acc, mut best) = (0i64, i64::MAX);
                for k in 1..=frees.len().min(members.len()) {
                    acc += frees[k - 1].max(heads[k - 1]) + tails[k - 1];
                    let kk = k as i64;
                    best = best.min((acc + energy + kk - 1) / kk);
                }
                makespan = makespan.max(best);

                if m.replan.is_none() {
                    // Shortest processing time on the pool's units.
                    let mut durs: Vec<i64> = members.iter().map(|&(i, _)| m.dur[i]).collect();
                    durs.sort_unstable();
                    let mut machines = std::collections::BinaryHeap::new();
                    for &f in &frees {
                        machines.push(std::cmp::Reverse(f));
                    }
                    let mut total = 0;
                    for d in durs {
                        let std::cmp::Reverse(f) = machines.pop().unwrap();
                        total += f + d;
                        machines.push(std::cmp::Reverse(f + d));
                    }
                    let others: i64 = (0..m.n)
                        .filter(|&i| !self.placed[i] && !members.iter().any(|mm| mm.0 == i))
                        .map(|i| head[i] + m.dur[i])
                        .sum();
                    spt_best = spt_best.max(total + others);
                }
            } else {
                let energy: i64 = members.iter().map(|&(i, c)| m.dur[i] * i64::from(c)).sum();
                let need = members.iter().map(|mm| mm.1 as usize).max().unwrap_or(1);
                if need > frees.len() {
                    return None;
                }
                let mut best = i64::MAX;
                let mut acc: i64 = frees[..need - 1].iter().sum();
                for k in need..=frees.len() {
                    acc += frees[k - 1];
                    let kk = k as i64;
                    best = best.min((acc + energy + kk - 1) / kk);
                }
                makespan = makespan.max(best);
            }
        }

        for clique in &m.cliques {
            let mut members: Vec<usize> = clique.iter().copied().filter(|&i| !self.placed[i]).collect();
            if members.is_empty() {
                continue;
            }
            // Latest members first: the tasks released after any head must
            // all run after it, one at a time.
            members.sort_by_key(|&i| std::cmp::Reverse(head[i]));
            let (mut work, mut min_tail) = (0i64, i64::MAX);
            for &i in &members {
                work += m.dur[i];
                min_tail = min_tail.min(m.tail[i]);
                makespan = makespan.max(head[i] + work + min_tail);
            }
            if m.replan.is_none() {
                let first = members.iter().map(|&i| head[i]).min().unwrap_or(0);
                let mut durs: Vec<i64> = members.iter().map(|&i| m.dur[i]).collect();
                durs.sort_unstable();
                let (mut t, mut total) = (first, 0i64);
                for d in durs {
                    t += d;
                    total += t;
                }
                let others: i64 = (0..m.n)
                    .filter(|&i| !self.placed[i] && !members.contains(&i))
                    .map(|i| head[i] + m.dur[i])
                    .sum();
                spt_best = spt_best.max(total + others);
            }
        }

        let g = m.granularity;
        let makespan = (makespan + g - 1) / g * g;
        let mut lb = m.w.makespan * makespan + self.partial + rest;
        if m.replan.is_none() {
            lb += m.w.completion * sum_end.max(spt_best);
        }
        Some(lb)
    }

    fn place(&mut self, c: &Candidate) -> Undo {
        let m = self.m;
        let i = c.task;
        let undo = Undo {
            last_start: self.last_start,
            last_task: self.last_task,
            partial: self.partial,
            cur_max: self.cur_max,
            frees: c.units.iter().map(|&u| (u, self.free[u], self.last_on[u])).collect(),
        };
        let e = c.start + m.dur[i];
        self.placed[i] = true;
        self.start[i] = c.start;
        self.end[i] = e;
        self.team[i] = c.units.clone();
        for &u in &c.units {
            self.free[u] = e;
            self.last_on[u] = Some(i);
        }
        for &s in &m.succs[i] {
            self.pending[s] -= 1;
        }
        self.order.push(i);
        self.last_start = c.start;
        self.last_task = Some(i);
        self.cur_max = self.cur_max.max(e);
        self.remaining -= 1;
        self.partial += m.team_cost(i, &c.units);
        self.partial += if m.replan.is_some() {
            m.timing_floor(i, c.start)
        } else {
            m.w.completion * e
        };
        undo
    }

    fn unplace(&mut self, c: &Candidate, undo: Undo) {
        let i = c.task;
        self.placed[i] = false;
        self.team[i].clear();
        for (u, f, l) in undo.frees {
            self.free[u] = f;
            self.last_on[u] = l;
        }
        for &s in &self.m.succs[i] {
            self.pending[s] += 1;
        }
        self.order.pop();
        self.last_start = undo.last_start;
        self.last_task = undo.last_task;
        self.partial = undo.partial;
        self.cur_max = undo.cur_max;
        self.remaining += 1;
    }

    fn state_key(&self) -> Vec<i64> {
        let m = self.m;
        let mut key = Vec::with_capacity(m.n / 64 + 8 + self.free.len() + m.n);
        for chunk in self.placed.chunks(63) {
            key.push(chunk.iter().enumerate().fold(0i64, |acc, (b, &p)| acc | (i64::from(p) << b)));
        }
        key.push(self.last_start);
        key.push(self.last_task.map_or(-1, |t| t as i64));
        key.push(self.cur_max);
        for units in &m.type_units {
            let mut f: Vec<i64> = units.iter().map(|&u| self.free[u].max(self.last_start)).collect();
            f.sort_unstable();
            key.extend(f);
        }
        for i in 0..m.n {
            if self.placed[i]
                && (m.succs[i].iter().any(|&s| !self.placed[s]) || m.conflicts[i].iter().any(|&c| !self.placed[c]))
            {
                key.push(self.end[i].max(self.last_start));
            }
        }
        key
    }

    fn prunes(&mut self, lb: i64) -> bool {
        let Some(best) = &self.best else {
            return false;
        };
        if lb >= best.objective {
            return true;
        }
        let tol = self.limits.gap;
        if tol > 0.0 && (best.objective - lb) as f64 <= tol * best.objective.abs() as f64 {
            self.gap_bound = self.gap_bound.min(lb);
            return true;
        }
        false
    }

    fn leaf(&mut self) {
        let m = self.m;
        let (objective, start) = match &m.replan {
            None => (self.partial + m.w.makespan * self.cur_max, self.start.clone()),
            Some(rp) => self.retime(rp),
        };
        if self.best.as_ref().is_none_or(|b| objective < b.objective) {
            self.best = Some(Incumbent { objective, start, units: self.team.clone() });
        }
    }

    /// Optimal timing of the future tasks for the orderings of this leaf.
    fn retime(&self, rp: &ReplanData) -> (i64, Vec<i64>) {
        let m = self.m;
        let mut p = TimingProblem::default();
        let mut var = vec![usize::MAX; m.n];
        let mut frozen_floor = 0i64;
        let mut unit_floor = vec![0i64; self.free.len()];
        for i in 0..m.n {
            if let Some(f) = &rp.frozen[i] {
                frozen_floor = frozen_floor.max(f.end);
                for &u in &f.units {
                    unit_floor[u] = unit_floor[u].max(f.end);
                }
            }
        }
        for &i in &self.order {
            let mut lo = rp.at.max(m.release[i]);
            for &q in m.preds[i].iter().chain(&m.conflicts[i]) {
                if rp.frozen[q].is_some() {
                    lo = lo.max(self.end[q]);
                }
            }
            for &u in &self.team[i] {
                lo = lo.max(unit_floor[u]);
            }
            let v = p.add_var(lo, m.latest_end[i] - m.dur[i], m.w.completion);
            let (s0, e0) = rp.orig[i];
            p.kinks[v].push((s0, m.w.retiming));
            p.kinks[v].push((e0 - m.dur[i], m.w.retiming));
            var[i] = v;
        }
        let mk = p.add_var(frozen_floor, i64::MAX / 8, m.w.makespan);
        let mut last_on: Vec<Option<usize>> = vec![None; self.free.len()];
        for (pos, &i) in self.order.iter().enumerate() {
            for &q in &m.preds[i] {
                if var[q] != usize::MAX {
                    p.arcs.push((var[q], var[i], m.dur[q]));
                }
            }
            for &q in &m.conflicts[i] {
                if var[q] != usize::MAX && self.order[..pos].contains(&q) {
                    p.arcs.push((var[q], var[i], m.dur[q]));
                }
            }
            for &u in &self.team[i] {
                if let Some(q) = last_on[u] {
                    p.arcs.push((var[q], var[i], m.dur[q]));
                }
                last_on[u] = Some(i);
            }
            p.arcs.push((var[i], mk, m.dur[i]));
        }
        let mut x0: Vec<i64> = self.order.iter().map(|&i| self.start[i]).collect();
        x0.push(self.cur_max);
        let x = p.minimize(x0);

        let mut start = self.start.clone();
        for &i in &self.order {
            start[i] = x[var[i]];
        }
        let mut objective = rp.constant + p.cost(&x);
        for &i in &self.order {
            objective += m.w.completion * m.dur[i] + m.team_cost(i, &self.team[i]);
        }
        (objective, start)
    }

    fn dfs(&mut self, lb: i64) {
        self.nodes += 1;
        if self.out_of_budget() {
            self.open_bound = self.open_bound.min(lb);
            return;
        }
        if self.remaining == 0 {
            self.leaf();
            return;
        }
        let candidates = self.candidates();
        for (k, c) in candidates.iter().enumerate() {
            let undo = self.place(c);
            let child = self.bound().filter(|&lb| !self.prunes(lb) && self.fresh_state());
            if let Some(child) = child {
                self.dfs(child);
            }
            self.unplace(c, undo);
            if self.aborted {
                for c in &candidates[k + 1..] {
                    let undo = self.place(c);
                    if let Some(lb) = self.bound() {
                        self.open_bound = self.open_bound.min(lb);
                    }
                    self.unplace(c, undo);
                }
                return;
            }
        }
    }

    /// Records the node in the transposition table; false if an equal
    /// state was already reached at no greater cost.
    fn fresh_state(&mut self) -> bool {
        if self.m.replan.is_some() {
            return true;
        }
        let key = self.state_key();
        match self.table.get_mut(&key) {
            Some(seen) if *seen <= self.partial => false,
            Some(seen) => {
                *seen = self.partial;
                true
            }
            None => {
                if self.table.len() < TT_LIMIT {
                    self.table.insert(key, self.partial);
                }
                true
            }
        }
    }

    /// Follows the first team_spec at every level without backtracking.
    fn dive(&mut self) {
        let mut trail = Vec::new();
        while self.remaining > 0 {
            let Some(c) = self.candidates().into_iter().next() else {
                break;
            };
            let undo = self.place(&c);
            trail.push((c, undo));
        }
        if self.remaining == 0 {
            self.leaf();
        }
        while let Some((c, undo)) = trail.pop() {
            self.unplace(&c, undo);
        }
    }
}

struct Undo {
    last_start: i64,
    last_task: Option<usize>,
    partial: i64,
    cur_max: i64,
    frees: Vec<(usize, i64, Option<usize>)>,
}

type UnitKey = ((i32, i64), Vec<usize>);

/// k-combinations of `items` (sorted by key), skipping choices that only
/// differ by units with equal keys.
fn combos(items: &[(UnitKey, usize)], k: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    let mut prev: Option<&UnitKey> = None;
    for j in from..items.len() {
        if items.len() - j < k - cur.len() {
            break;
        }
        if prev == Some(&items[j].0) {
            continue;
        }
        prev = Some(&items[j].0);
        cur.push(items[j].1);
        combos(items, k, j + 1, cur, out);
        cur.pop();
    }
}

/// Runs the search on a program. `seed` is an optional feasible plan used
/// as the first incumbent.
pub(crate) fn run(program: &IntegerProgram, limits: &SolveLimits, seed: Option<(i64, &Plan)>) -> Plan {
    let m = Compiled::new(program);
    let mut search = Search::new(&m, limits);
    let units = &program.units;

    if let Some((objective, plan)) = seed {
        let mut start = vec![0; m.n];
        let mut team = vec![Vec::new(); m.n];
        for (i, task) in program.instance.tasks.iter().enumerate() {
            let e = plan.entry(&task.id).expect("seed covers every task");
            start[i] = e.start;
            team[i] = e
                .robots
                .iter()
                .map(|r| units.iter().position(|u| u.id == *r).expect("seed uses known units"))
                .collect();
            team[i].sort_unstable();
        }
        search.best = Some(Incumbent { objective, start, units: team });
    }

    let root = search.bound();
    if let Some(root_lb) = root {
        search.dive();
        let incumbent_ok = search.best.as_ref().is_some_and(|b| b.objective <= root_lb);
        if !incumbent_ok {
            search.dfs(root_lb);
        }
    }
    let elapsed = search.began.elapsed().as_secs_f64();
    let complete = !search.aborted;
    let best_bound = match (&search.best, root) {
        (Some(b), _) if complete => b.objective.min(search.gap_bound),
        (Some(b), Some(lb)) => lb.max(search.open_bound.min(search.gap_bound)).min(b.objective),
        (None, Some(lb)) => lb.max(search.open_bound.min(search.gap_bound)),
        (_, None) => 0,
    };
    let stats = SolveStats {
        nodes: search.nodes,
        wall_time_secs: elapsed,
        best_bound,
        incumbent: search.best.as_ref().map(|b| b.objective),
        proven_optimal: complete && search.best.as_ref().is_some_and(|b| b.objective == best_bound),
    };

    let Some(best) = search.best else {
        return Plan::infeasible(stats);
    };
    let entries: Vec<PlanEntry> = program
        .instance
        .tasks
        .iter()
        .enumerate()
        .map(|(i, task)| {
            let mut team = best.units[i].clone();
            team.sort_unstable();
            PlanEntry {
                task: task.id.clone(),
                robots: team.iter().map(|&u| units[u].id.clone()).collect(),
                start: best.start[i],
                end: best.start[i] + m.dur[i],
            }
        })
        .collect();
    let makespan = entries.iter().map(|e| e.end).max().unwrap_or(0);
    let status = if stats.proven_optimal {
        SolveStatus::Optimal
    } else {
        let gap = (best.objective - best_bound) as f64 / (best.objective.abs().max(1)) as f64;
        SolveStatus::FeasibleWithGap { gap }
    };
    Plan { entries, objective: best.objective, makespan, status, stats: Some(stats) }
}
