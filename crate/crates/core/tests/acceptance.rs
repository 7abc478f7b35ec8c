//! One pass/fail line per acceptance criterion. Runs without the libtest
//! harness so the lines always print; exits non-zero if any check fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{oracle_replan, oracle_solve, random_instance, random_update, REPLAN_SHAPE, SOLVER_SHAPE};
use forecrew::bench::{run_bench, BenchMode, ScenarioGenerator};
use forecrew::case_study::{self, TaskSets, FLEET_RANGES};
use forecrew::model::{apply_deltas, ConstraintDelta, Plan, SolveStatus, TimeWindow};
use forecrew::narrative::{
    evaluate, generate_corpus, parse_response, worked_examples, ExtractionRecord, Extractor, TaskKnowledgeBase,
};
use forecrew::replan::ReplanError;
use forecrew::{build_program, plan_delta, replan, solve, split_tasks, verify_plan, ReplanContext, SolveLimits};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn case_study_optimum() -> Outcome {
    let inst = case_study::example_schedule_instance();
    let began = Instant::now();
    let (plan, stats) = solve(&build_program(&inst).map_err(|e| e.to_string())?, &SolveLimits::default())
        .map_err(|e| e.to_string())?;
    let secs = began.elapsed().as_secs_f64();
    ensure(plan.status == SolveStatus::Optimal, format!("status {:?}", plan.status))?;
    ensure(plan.makespan == 315, format!("makespan {}", plan.makespan))?;
    ensure(secs < 120.0, format!("took {secs:.1} s"))?;
    let report = verify_plan(&inst, &plan);
    ensure(report.is_empty(), report.to_string())?;
    Ok(format!("Optimal, makespan 315 min, {} nodes, {secs:.2} s", stats.nodes))
}

/// Tasks of one unit in start order.
fn unit_order(plan: &Plan, unit: &str) -> Vec<String> {
    let mut on: Vec<_> = plan.entries.iter().filter(|e| e.robots.iter().any(|r| r == unit)).collect();
    on.sort_by_key(|e| e.start);
    on.into_iter().map(|e| e.task.clone()).collect()
}

fn position(order: &[String], task: &str) -> Option<usize> {
    order.iter().position(|t| t == task)
}

fn golden_replan() -> Outcome {
    let inst = case_study::example_schedule_instance();
    let original = case_study::reference_schedule();
    let at = 12;
    let (past, future) = split_tasks(&original, at);
    let delayed = apply_deltas(&inst, &[ConstraintDelta::StartTime { task: "T4".into(), shift: 30 }])
        .map_err(|e| e.to_string())?;
    let (revised, _) =
        replan(&ReplanContext::new(original.clone(), at, delayed.clone()), &SolveLimits::default()).map_err(|e| e.to_string())?;

    for t in &past {
        ensure(revised.entry(t) == original.entry(t), format!("{t} moved"))?;
    }
    let report = verify_plan(&delayed, &revised);
    ensure(report.is_empty(), report.to_string())?;
    let r1 = ["R1#0", "R1#1"]
        .into_iter()
        .find(|u| {
            let order = unit_order(&revised, u);
            matches!((position(&order, "T5"), position(&order, "T4")), (Some(a), Some(b)) if a < b)
        })
        .ok_or("no R1 unit runs T5 then T4")?;
    let (dx, dt) = plan_delta(&original, &revised, &future).map_err(|e| e.to_string())?;

    let (same, _) =
        replan(&ReplanContext::new(original.clone(), at, inst.clone()), &SolveLimits::default()).map_err(|e| e.to_string())?;
    let zero = plan_delta(&original, &same, &future).map_err(|e| e.to_string())?;
    ensure(zero == (0, 0), format!("zero-delta replan gave {zero:?}"))?;

    Ok(format!(
        "{} frozen tasks kept, {r1} runs T5 then T4, dx {dx}, dt {dt}, makespan {}; zero delta (0, 0)",
        past.len(),
        revised.makespan
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut solved = 0;
    for seed in 0..250 {
        let inst = random_instance(seed, &SOLVER_SHAPE);
        let (plan, _) = solve(&build_program(&inst).unwrap(), &SolveLimits::default()).unwrap();
        let got = plan.status.is_feasible().then_some(plan.objective);
        ensure(got == oracle_solve(&inst), format!("solver seed {seed}: {got:?}"))?;
        solved += usize::from(got.is_some());
    }
    ensure(solved >= 200, format!("only {solved} feasible solver instances"))?;

    let mut compared = 0;
    for seed in 0..250u64 {
        let inst = random_instance(seed, &REPLAN_SHAPE);
        let (original, _) = solve(&build_program(&inst).unwrap(), &SolveLimits::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let at = rng.gen_range(0..=original.makespan / 2);
        let (_, future) = split_tasks(&original, at);
        let deltas = random_update(&inst, &future, &mut rng);
        let updated = apply_deltas(&inst, &deltas).unwrap();
        let expected = oracle_replan(&updated, &original, at, updated.default_horizon() + at);
        match replan(&ReplanContext::new(original, at, updated), &SolveLimits::default()) {
            Ok((plan, _)) => {
                ensure(Some(plan.objective) == expected, format!("replan seed {seed}"))?;
                compared += 1;
            }
            Err(ReplanError::FrozenInfeasible { .. }) => {}
            Err(ReplanError::Infeasible { .. }) => ensure(expected.is_none(), format!("replan seed {seed}"))?,
            Err(e) => return Err(format!("replan seed {seed}: {e}")),
        }
    }
    ensure(compared >= 200, format!("only {compared} replan comparisons"))?;
    Ok(format!("{solved}/250 solver and {compared}/250 replan instances match enumeration"))
}

fn feasibility_suite() -> Outcome {
    let limits = SolveLimits { time_budget: Duration::from_secs(30), node_budget: 2_000, ..SolveLimits::default() };
    let generator = ScenarioGenerator::new(42);
    let mut parts = Vec::new();
    for mode in BenchMode::ALL {
        let summary = run_bench(&generator, mode, 500, &limits).summary();
        ensure(
            summary.verified == 500,
            format!("{mode}: {} of 500 verified, {} failures", summary.verified, summary.failures),
        )?;
        parts.push(format!("{mode} 500/500"));
    }

    let fleet: Vec<(&str, u32)> = FLEET_RANGES.iter().map(|&(id, _, hi)| (id, hi)).collect();
    let mut largest = case_study::scenario(&fleet, TaskSets { wiring: 2, window: 2, hvac: 2, inspection: true });
    ensure(
        largest.tasks.len() == 27 && largest.total_robot_count() == 15,
        format!("largest scenario is {} tasks, {} robots", largest.tasks.len(), largest.total_robot_count()),
    )?;
    let original = build_program(&largest).map_err(|e| e.to_string())?.size();
    for task in largest.tasks.iter_mut().take(3) {
        task.window = Some(TimeWindow { earliest_start: 120, latest_end: None });
    }
    let windows = build_program(&largest).map_err(|e| e.to_string())?.size();
    for (label, size) in [("original", &original), ("windows", &windows)] {
        ensure(
            size.variables <= 345 && size.constraints <= 379,
            format!("{label}: {} variables, {} constraints", size.variables, size.constraints),
        )?;
    }
    Ok(format!(
        "{}; 27 tasks / 15 robots: {}/{} original, {}/{} windows",
        parts.join(", "),
        original.variables,
        original.constraints,
        windows.variables,
        windows.constraints
    ))
}

const SCORED: &str = include_str!("../fixtures/extraction_scored.json");

const PRINTED: [&str; 3] = [
    r#"{"changes": [
{"constraint_type": 2, "parameters": [T6, 2]},
{"constraint_type": 3, "parameters": [T11, +2.5]}
]}"#,
    r#"{"changes": [
{"constraint_type": 2, "parameters": [T13, 1.5]},
{"constraint_type": 3, "parameters": [T7, +2]},
{"constraint_type": 2, "parameters": [T13, 1.5]}
]}"#,
    r#"{"changes": [
{"constraint_type": 4, "parameters": [R2, -1]},
{"constraint_type": 4, "parameters": [R2, -2]}
]}"#,
];

fn narrative_loop() -> Outcome {
    let kb = TaskKnowledgeBase::case_study();
    let corpus = generate_corpus(&kb, 42, 5, 100);
    ensure(corpus.len() == 500, format!("{} records", corpus.len()))?;
    let m = evaluate(&Extractor::Rules.run_corpus(&kb, &corpus, 4)).map_err(|e| e.to_string())?;
    ensure(m.correct_rate == 1.0, format!("correct rate {}", m.correct_rate))?;

    let fixture: serde_json::Value = serde_json::from_str(SCORED).map_err(|e| e.to_string())?;
    let records: Vec<ExtractionRecord> =
        serde_json::from_value(fixture["records"].clone()).map_err(|e| e.to_string())?;
    let got = evaluate(&records).map_err(|e| e.to_string())?;
    let want = &fixture["expected"];
    for (name, value) in [
        ("constraint_accuracy", got.constraint_accuracy),
        ("parameter_accuracy", got.parameter_accuracy),
        ("correct_rate", got.correct_rate),
    ] {
        let expected = want[name].as_f64().ok_or(format!("fixture lacks {name}"))?;
        ensure((value - expected).abs() < 1e-12, format!("{name} {value} != {expected}"))?;
    }

    for (i, (reply, (narrative, gold))) in PRINTED.iter().zip(worked_examples()).enumerate() {
        let (printed, diagnostics) = parse_response(reply, &kb)?;
        ensure(diagnostics.is_empty() && printed == gold, format!("printed output {} reads as {printed:?}", i + 1))?;
        let parsed = forecrew::narrative::rule_parse(narrative, &kb).map_err(|e| e.to_string())?;
        ensure(parsed == printed, format!("worked example {} parses to {parsed:?}", i + 1))?;
    }
    Ok(format!(
        "rules correct rate 1.000 on 500 records; fixture {:.4}/{:.4}/{:.4}; 3 worked examples match",
        got.constraint_accuracy, got.parameter_accuracy, got.correct_rate
    ))
}

fn main() -> ExitCode {
    let checks: [Check; 5] = [
        ("case-study optimum", case_study_optimum),
        ("replanning golden test", golden_replan),
        ("oracle equivalence", oracle_equivalence),
        ("feasibility suite", feasibility_suite),
        ("narrative loop", narrative_loop),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in checks {
        let began = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = began.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail} ({secs:.1} s)"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why} ({secs:.1} s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
