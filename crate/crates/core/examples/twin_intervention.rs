//! Runs the worked example on the virtual clock, reports a material delay
//! in plain words at minute 12, and prints the status panels before and
//! after the replan.

use forecrew::case_study;
use forecrew::narrative::Extractor;
use forecrew::twin::{TaskStatus, TwinState};
use forecrew::SolveLimits;

fn panel(state: &TwinState) {
    let by = |s: TaskStatus| -> Vec<&str> {
        state.tasks.iter().filter(|(_, v)| **v == s).map(|(k, _)| k.as_str()).collect()
    };
    println!("  clock {} plan #{} makespan {}", state.clock, state.plan_id, state.plan.makespan);
    println!("  ongoing:   {}", by(TaskStatus::Ongoing).join(" "));
    println!("  completed: {}", by(TaskStatus::Completed).join(" "));
}

fn main() {
    let instance = case_study::example_schedule_instance();
    let plan = case_study::reference_schedule();
    let mut twin = TwinState::init(&instance, &plan).expect("reference schedule verifies");
    println!("start:");
    panel(&twin);

    twin.advance(12).expect("forward");
    let r1 = |t: &TwinState| -> Vec<String> {
        t.plan.robot_sequence("R1#0").iter().map(|e| format!("{}@{}", e.task, e.start)).collect()
    };
    println!("R1#0 before: {}", r1(&twin).join(" "));

    let narrative = "The duct structural materials are delayed until half past the hour.";
    let report = twin.intervene(narrative, &Extractor::Rules, &SolveLimits::default()).expect("replan succeeds");
    println!("\"{narrative}\"");
    for d in &report.deltas {
        println!("  -> {d}");
    }
    println!(
        "  reassignments {}, retiming {} min, makespan {} -> {}",
        report.reassignments, report.retiming, report.makespan_before, report.makespan_after
    );
    println!("R1#0 after:  {}", r1(&twin).join(" "));
    panel(&twin);

    twin.advance(twin.plan.makespan).expect("forward");
    println!("end:");
    panel(&twin);
    println!("{} events logged", twin.events.len());
}
