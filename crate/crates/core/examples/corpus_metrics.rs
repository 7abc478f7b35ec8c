//! Generates the seeded 5 x 100 narrative corpus, re-extracts it with the
//! rule parser and scores the result, then scores the hand-labelled
//! fixture of ten imperfect extractions.
//!
//! Usage: `cargo run --release --example corpus_metrics -- [seed]`

use forecrew::narrative::{evaluate, generate_corpus, ExtractionRecord, Extractor, TaskKnowledgeBase};

const SCORED: &str = include_str!("../fixtures/extraction_scored.json");

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let kb = TaskKnowledgeBase::case_study();
    let corpus = generate_corpus(&kb, seed, 5, 100);
    for group in 0..5 {
        let sample = &corpus[group * 100];
        println!("group {} ({} changes): {}", group + 1, sample.gold.len(), sample.narrative);
    }

    let scored = Extractor::Rules.run_corpus(&kb, &corpus, 4);
    let m = evaluate(&scored).expect("every record has gold");
    println!(
        "\nrules on {} records: constraint {:.3}, parameter {:.3}, correct {:.3}",
        m.records, m.constraint_accuracy, m.parameter_accuracy, m.correct_rate
    );

    let fixture: serde_json::Value = serde_json::from_str(SCORED).expect("fixture is JSON");
    let records: Vec<ExtractionRecord> =
        serde_json::from_value(fixture["records"].clone()).expect("fixture records");
    let m = evaluate(&records).expect("every record has gold");
    println!(
        "hand-scored fixture: constraint {:.4}, parameter {:.4}, correct {:.4}",
        m.constraint_accuracy, m.parameter_accuracy, m.correct_rate
    );
    println!("by hand: {}", fixture["expected"]["derivation"].as_str().unwrap_or(""));
}
