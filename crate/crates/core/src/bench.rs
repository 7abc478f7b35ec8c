//! Seeded scenario generation over the case-study fleet and task groups,
//! and a benchmark runner that solves, verifies and summarizes them.

use std::fmt::{self, Write as _};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::case_study::{self, TaskSets, FLEET_RANGES, SHARED_WORKER_TASKS};
use crate::model::{apply_deltas, ConstraintDelta, Minutes, ProblemInstance, SolveStatus};
use crate::replan::{plan_delta, replan, ReplanContext};
use crate::solver::{build_program, solve, verify_plan, SolveLimits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMode {
    Original,
    Windows,
    Conflicts,
    Replanning,
}

impl BenchMode {
    pub const ALL: [BenchMode; 4] = [BenchMode::Original, BenchMode::Windows, BenchMode::Conflicts, BenchMode::Replanning];

    pub fn label(self) -> &'static str {
        match self {
            BenchMode::Original => "original",
            BenchMode::Windows => "windows",
            BenchMode::Conflicts => "conflicts",
            BenchMode::Replanning => "replanning",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            BenchMode::Original => "Original",
            BenchMode::Windows => "Time window",
            BenchMode::Conflicts => "Task conflicts",
            BenchMode::Replanning => "Replanning",
        }
    }
}

impl std::str::FromStr for BenchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BenchMode::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected original, windows, conflicts or replanning)"))
    }
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Window starts are drawn between two and four hours on a quarter-hour
/// grid.
pub const WINDOW_STARTS: std::ops::RangeInclusive<Minutes> = 120..=240;
pub const WINDOW_STEP: Minutes = 15;

/// Window deltas to inject at replanning time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplanDraw {
    /// Fraction of the original makespan, in `[0, 0.25]`, at which to
    /// replan.
    pub at_fraction: f64,
    pub window_count: usize,
    pub draw_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub index: usize,
    pub mode: BenchMode,
    pub instance: ProblemInstance,
    pub replan: Option<ReplanDraw>,
}

#[derive(Debug, Clone)]
pub struct ScenarioGenerator {
    pub seed: u64,
}

fn window_start(rng: &mut ChaCha8Rng) -> Minutes {
    let steps = (WINDOW_STARTS.end() - WINDOW_STARTS.start()) / WINDOW_STEP;
    WINDOW_STARTS.start() + WINDOW_STEP * rng.gen_range(0..=steps)
}

impl ScenarioGenerator {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// The `index`-th scenario of a mode. Independent of how many other
    /// scenarios are generated.
    pub fn scenario(&self, mode: BenchMode, index: usize) -> Scenario {
        let stream = self.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (mode as u64) << 56;
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let fleet: Vec<(&str, u32)> = FLEET_RANGES
            .iter()
            .map(|&(id, lo, hi)| (id, rng.gen_range(lo..=hi)))
            .collect();
        let sets = TaskSets {
            wiring: rng.gen_range(1..=2),
            window: rng.gen_range(1..=2),
            hvac: rng.gen_range(1..=2),
            inspection: true,
        };
        let mut instance = case_study::scenario(&fleet, sets);
        let mut draw = None;
        match mode {
            BenchMode::Original => {}
            BenchMode::Windows => {
                let count = rng.gen_range(1..=3);
                let mut ids: Vec<String> = instance.tasks.iter().map(|t| t.id.clone()).collect();
                ids.shuffle(&mut rng);
                for id in ids.into_iter().take(count) {
                    let start = window_start(&mut rng);
                    let task = instance.tasks.iter_mut().find(|t| t.id == id).expect("drawn from tasks");
                    task.window = Some(crate::model::TimeWindow { earliest_start: start, latest_end: None });
                }
            }
            BenchMode::Conflicts => {
                let shared: Vec<String> = instance
                    .tasks
                    .iter()
                    .filter(|t| SHARED_WORKER_TASKS.iter().any(|base| t.id == *base || t.id.starts_with(&format!("{base}_"))))
                    .map(|t| t.id.clone())
                    .collect();
                for (k, a) in shared.iter().enumerate() {
                    for b in &shared[k + 1..] {
                        instance.conflicts.push((a.clone(), b.clone()));
                    }
                }
            }
            BenchMode::Replanning => {
                draw = Some(ReplanDraw {
                    at_fraction: rng.gen_range(0.0..=0.25),
                    window_count: rng.gen_range(1..=3),
                    draw_seed: rng.gen(),
                });
            }
        }
        Scenario { index, mode, instance, replan: draw }
    }

    pub fn scenarios(&self, mode: BenchMode, count: usize) -> Vec<Scenario> {
        (0..count).map(|i| self.scenario(mode, i)).collect()
    }
}

/// Deterministic per-scenario outcome (no timing).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub index: usize,
    pub mode: BenchMode,
    pub tasks: usize,
    pub robots: usize,
    pub variables: usize,
    pub constraints: usize,
    pub status: String,
    pub makespan: Minutes,
    pub objective: i64,
    pub nodes: u64,
    pub verified: bool,
    pub replan_at: Option<Minutes>,
    pub reassignments: Option<i64>,
    pub retiming: Option<i64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub seconds: f64,
}

fn status_label(status: &SolveStatus) -> String {
    match status {
        SolveStatus::Optimal => "optimal".into(),
        SolveStatus::FeasibleWithGap { gap } => format!("gap {gap:.4}"),
        SolveStatus::Infeasible => "infeasible".into(),
    }
}

/// Solves one scenario and checks the result. For the replanning mode the
/// solved plan is the original; the replan after the injected windows is
/// what gets measured.
pub fn run_scenario(scenario: &Scenario, limits: &SolveLimits) -> ScenarioResult {
    let inst = &scenario.instance;
    let mut result = ScenarioResult {
        index: scenario.index,
        mode: scenario.mode,
        tasks: inst.tasks.len(),
        robots: inst.total_robot_count(),
        variables: 0,
        constraints: 0,
        status: String::new(),
        makespan: 0,
        objective: 0,
        nodes: 0,
        verified: false,
        replan_at: None,
        reassignments: None,
        retiming: None,
        error: None,
        seconds: 0.0,
    };
    let program = match build_program(inst) {
        Ok(p) => p,
        Err(e) => {
            result.error = Some(e.to_string());
            return result;
        }
    };
    let size = program.size();
    result.variables = size.variables;
    result.constraints = size.constraints;
    let began = Instant::now();
    let (plan, stats) = match solve(&program, limits) {
        Ok(x) => x,
        Err(e) => {
            result.error = Some(e.to_string());
            return result;
        }
    };
    let (final_instance, final_plan, final_stats) = match &scenario.replan {
        None => (inst.clone(), plan, stats),
        Some(draw) if plan.status.is_feasible() => {
            let at = (plan.makespan as f64 * draw.at_fraction).floor() as Minutes;
            let (_, future) = crate::replan::split_tasks(&plan, at);
            let mut rng = ChaCha8Rng::seed_from_u64(draw.draw_seed);
            let mut picks = future.clone();
            picks.shuffle(&mut rng);
            let deltas: Vec<ConstraintDelta> = picks
                .into_iter()
                .take(draw.window_count)
                .map(|task| ConstraintDelta::StartTime { task, shift: window_start(&mut rng) })
                .collect();
            let updated = apply_deltas(inst, &deltas).expect("future tasks exist");
            let replan_began = Instant::now();
            let ctx = ReplanContext::new(plan.clone(), at, updated.clone());
            result.replan_at = Some(at);
            match replan(&ctx, limits) {
                Ok((revised, stats)) => {
                    let seconds = replan_began.elapsed().as_secs_f64();
                    let (dx, dt) = plan_delta(&plan, &revised, &future).expect("same tasks");
                    result.reassignments = Some(dx);
                    result.retiming = Some(dt);
                    result.seconds = seconds;
                    (updated, revised, stats)
                }
                Err(e) => {
                    result.error = Some(e.to_string());
                    return result;
                }
            }
        }
        Some(_) => (inst.clone(), plan, stats),
    };
    if scenario.replan.is_none() {
        result.seconds = began.elapsed().as_secs_f64();
    }
    result.status = status_label(&final_plan.status);
    result.makespan = final_plan.makespan;
    result.objective = final_plan.objective;
    result.nodes = final_stats.nodes;
    result.verified = final_plan.status.is_feasible() && verify_plan(&final_instance, &final_plan).is_empty();
    result
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub mode: BenchMode,
    pub results: Vec<ScenarioResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub mode: BenchMode,
    pub scenarios: usize,
    pub min_tasks: usize,
    pub max_tasks: usize,
    pub max_robots: usize,
    pub max_variables: usize,
    pub max_constraints: usize,
    pub max_seconds: f64,
    pub avg_seconds: f64,
    pub optimal: usize,
    pub verified: usize,
    pub failures: usize,
}

/// Solves `count` scenarios in parallel; results are ordered by index.
pub fn run_bench(generator: &ScenarioGenerator, mode: BenchMode, count: usize, limits: &SolveLimits) -> BenchReport {
    let results = generator
        .scenarios(mode, count)
        .par_iter()
        .map(|s| run_scenario(s, limits))
        .collect();
    BenchReport { mode, results }
}

impl BenchReport {
    /// Scenario rows without timing, byte-identical for a given seed.
    pub fn csv(&self) -> String {
        let mut out = String::from(
            "index,mode,tasks,robots,variables,constraints,status,makespan,objective,nodes,verified,replan_at,reassignments,retiming,error\n",
        );
        let opt = |v: Option<i64>| v.map_or(String::new(), |v| v.to_string());
        for r in &self.results {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.index,
                r.mode,
                r.tasks,
                r.robots,
                r.variables,
                r.constraints,
                r.status,
                r.makespan,
                r.objective,
                r.nodes,
                r.verified,
                opt(r.replan_at),
                opt(r.reassignments),
                opt(r.retiming),
                r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
            );
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("index,seconds\n");
        for r in &self.results {
            let _ = writeln!(out, "{},{:.6}", r.index, r.seconds);
        }
        out
    }

    pub fn summary(&self) -> BenchSummary {
        let r = &self.results;
        let n = r.len().max(1) as f64;
        BenchSummary {
            mode: self.mode,
            scenarios: r.len(),
            min_tasks: r.iter().map(|x| x.tasks).min().unwrap_or(0),
            max_tasks: r.iter().map(|x| x.tasks).max().unwrap_or(0),
            max_robots: r.iter().map(|x| x.robots).max().unwrap_or(0),
            max_variables: r.iter().map(|x| x.variables).max().unwrap_or(0),
            max_constraints: r.iter().map(|x| x.constraints).max().unwrap_or(0),
            max_seconds: r.iter().map(|x| x.seconds).fold(0.0, f64::max),
            avg_seconds: r.iter().map(|x| x.seconds).sum::<f64>() / n,
            optimal: r.iter().filter(|x| x.status == "optimal").count(),
            verified: r.iter().filter(|x| x.verified).count(),
            failures: r.iter().filter(|x| x.error.is_some() || !x.verified).count(),
        }
    }
}

/// Renders summaries as a text table with one row per mode.
pub fn summary_table(rows: &[BenchSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<15} {:>7} {:>6} {:>9} {:>9} {:>10} {:>10} {:>8} {:>9}",
        "", "Tasks", "Robots", "Max vars", "Max cons", "Max s", "Avg s", "Optimal", "Verified"
    );
    for s in rows {
        let _ = writeln!(
            out,
            "{:<15} {:>7} {:>6} {:>9} {:>9} {:>10.3} {:>10.3} {:>8} {:>9}",
            s.mode.title(),
            format!("{}-{}", s.min_tasks, s.max_tasks),
            s.max_robots,
            s.max_variables,
            s.max_constraints,
            s.max_seconds,
            s.avg_seconds,
            format!("{}/{}", s.optimal, s.scenarios),
            format!("{}/{}", s.verified, s.scenarios),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_in_range() {
        let g = ScenarioGenerator::new(7);
        for mode in BenchMode::ALL {
            for i in 0..20 {
                let a = g.scenario(mode, i);
                assert_eq!(a, g.scenario(mode, i));
                let n = a.instance.tasks.len();
                assert!((14..=27).contains(&n), "{n}");
                assert!(a.instance.total_robot_count() <= 15);
                if mode == BenchMode::Windows {
                    let w: Vec<_> = a.instance.tasks.iter().filter_map(|t| t.window).collect();
                    assert!((1..=3).contains(&w.len()));
                    assert!(w.iter().all(|w| WINDOW_STARTS.contains(&w.earliest_start) && w.earliest_start % 15 == 0));
                }
                if mode == BenchMode::Conflicts {
                    assert!(!a.instance.conflicts.is_empty());
                }
            }
        }
    }

    #[test]
    fn single_scenario_csv_has_one_row() {
        let report = run_bench(&ScenarioGenerator::new(1), BenchMode::Original, 1, &SolveLimits::default());
        assert_eq!(report.csv().lines().count(), 2);
        assert!(report.results[0].verified);
    }
}
