//! Generates random scenarios in each mode, solves them in parallel and
//! prints a summary table. Solves stop on a node budget, so the scenario
//! rows are the same on every run; only the timing columns move.
//!
//! Usage: `cargo run --release --example bench_scenarios -- [count] [seed] [nodes]`

use forecrew::bench::{run_bench, summary_table, BenchMode, ScenarioGenerator};
use forecrew::SolveLimits;

fn main() {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(2024);
    let generator = ScenarioGenerator::new(seed);
    let nodes: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let limits = SolveLimits { node_budget: nodes, ..SolveLimits::default() };
    let mut rows = Vec::new();
    for mode in BenchMode::ALL {
        let report = run_bench(&generator, mode, count, &limits);
        for r in report.results.iter().filter(|r| !r.verified) {
            println!("{mode} #{}: {} {}", r.index, r.status, r.error.as_deref().unwrap_or(""));
        }
        rows.push(report.summary());
    }
    print!("{}", summary_table(&rows));
}
