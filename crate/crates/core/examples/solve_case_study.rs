//! Solves the worked example (18 tasks, 7 robot units) to optimality and
//! prints the schedule per robot.

use forecrew::case_study;
use forecrew::{build_program, solve, verify_plan, SolveLimits};

fn main() {
    let instance = case_study::example_schedule_instance();
    let program = build_program(&instance).expect("case study is admissible");
    let size = program.size();
    println!("{} variables, {} constraints", size.variables, size.constraints);

    let (plan, stats) = solve(&program, &SolveLimits::default()).expect("positive limits");
    println!(
        "status {:?}, makespan {} min ({} h), objective {}, {} nodes in {:.2} s",
        plan.status,
        plan.makespan,
        plan.makespan as f64 / 60.0,
        plan.objective,
        stats.nodes,
        stats.wall_time_secs
    );
    for unit in instance.robot_units() {
        let row: Vec<String> = plan
            .robot_sequence(&unit.id)
            .iter()
            .map(|e| format!("{}[{}-{}]", e.task, e.start, e.end))
            .collect();
        println!("{:>6}: {}", unit.id, row.join(" "));
    }
    assert!(verify_plan(&instance, &plan).is_empty());
}
