//! Offline extraction: runs the rule parser over the three worked
//! narratives and a few short reports, printing the deltas and the
//! `{"changes": ...}` document a model would be asked to produce.

use forecrew::model::DeltaDocument;
use forecrew::narrative::{rule_parse, worked_examples, TaskKnowledgeBase};

fn main() {
    let kb = TaskKnowledgeBase::case_study();
    let short = [
        "The wall-drilling worker will be arriving an hour late.",
        "Wall painting takes 1.5 hours instead of 1 hour.",
        "Window frame installation no longer needs to wait for wall drilling.",
        "An additional R6 robot is on site.",
        "Wall painting and window frame installation cannot run at the same time.",
    ];
    let worked = worked_examples();
    let narratives = worked.iter().map(|(n, _)| *n).chain(short);
    for (i, narrative) in narratives.enumerate() {
        println!("[{}] {narrative}", i + 1);
        match rule_parse(narrative, &kb) {
            Ok(deltas) => {
                for d in &deltas {
                    println!("    {d}");
                }
                println!("    {}", DeltaDocument::from_deltas(&deltas).to_json());
                if let Some((_, gold)) = worked.get(i) {
                    println!("    matches the printed output: {}", &deltas == gold);
                }
            }
            Err(e) => println!("    error: {e}"),
        }
    }
}
