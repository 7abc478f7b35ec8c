//! Replans the worked example 12 minutes in, after the duct materials
//! needed by T4 are announced to arrive only at minute 30. Runs once from
//! the bundled reference schedule, where one R1 unit does T4 then T5, and
//! once from the plan the solver finds on its own.

use forecrew::case_study;
use forecrew::model::{apply_deltas, ConstraintDelta, Plan};
use forecrew::{build_program, plan_delta, replan, solve, verify_plan, ReplanContext, SolveLimits};

fn r1_orders(plan: &Plan) -> String {
    ["R1#0", "R1#1"]
        .iter()
        .map(|unit| {
            let mut on: Vec<_> = plan.entries.iter().filter(|e| e.robots.iter().any(|r| r == unit)).collect();
            on.sort_by_key(|e| e.start);
            let tasks: Vec<String> = on.iter().map(|e| format!("{}[{}-{}]", e.task, e.start, e.end)).collect();
            format!("{unit}: {}", tasks.join(" "))
        })
        .collect::<Vec<_>>()
        .join("\n    ")
}

fn run(label: &str, original: Plan) {
    let instance = case_study::example_schedule_instance();
    let delay = ConstraintDelta::StartTime { task: "T4".into(), shift: 30 };
    let updated = apply_deltas(&instance, &[delay]).expect("T4 exists");
    let ctx = ReplanContext::new(original.clone(), 12, updated.clone());
    let (started, future) = ctx.partition();

    let (revised, stats) = replan(&ctx, &SolveLimits::default()).expect("replan succeeds");
    let (dx, dt) = plan_delta(&original, &revised, &future).expect("same tasks");
    println!("{label}");
    println!("  started by minute 12: {}", started.join(", "));
    println!(
        "  status {:?}, makespan {} -> {}, reassignments {dx}, retiming {dt} min, {} nodes",
        revised.status, original.makespan, revised.makespan, stats.nodes
    );
    println!("  before:\n    {}", r1_orders(&original));
    println!("  after:\n    {}", r1_orders(&revised));
    assert!(verify_plan(&updated, &revised).is_empty());
}

fn main() {
    run("reference schedule", case_study::reference_schedule());
    let instance = case_study::example_schedule_instance();
    let (solved, _) = solve(&build_program(&instance).expect("admissible"), &SolveLimits::default()).expect("positive limits");
    run("\nsolver's own optimum", solved);
}
