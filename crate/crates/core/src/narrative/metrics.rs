//! Extraction metrics.
//!
//! Within a record, predicted deltas are aligned to gold deltas of the same
//! kind. Exact matches are paired first, so the counts below depend only on
//! the two multisets:
//!
//! * constraint accuracy: kind-matched pairs over gold deltas;
//! * parameter accuracy: exactly equal pairs over kind-matched pairs (zero
//!   when nothing matched);
//! * correct: predicted and gold are the same multiset.
//!
//! Each metric is averaged over records, so a fully correct record scores
//! one on all three and the correct rate never exceeds the other two.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{ConstraintDelta, DeltaKind};

use super::NarrativeError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub narrative: String,
    pub gold: Vec<ConstraintDelta>,
    #[serde(default)]
    pub predicted: Vec<ConstraintDelta>,
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub constraint_accuracy: f64,
    pub parameter_accuracy: f64,
    pub correct_rate: f64,
    pub records: usize,
}

/// Per-record scores.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    constraint: f64,
    parameter: f64,
    correct: bool,
}

fn multiset<K: Ord>(items: impl Iterator<Item = K>) -> BTreeMap<K, usize> {
    let mut m = BTreeMap::new();
    for k in items {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

fn overlap<K: Ord>(a: &BTreeMap<K, usize>, b: &BTreeMap<K, usize>) -> usize {
    a.iter().map(|(k, n)| (*n).min(b.get(k).copied().unwrap_or(0))).sum()
}

fn score(record: &ExtractionRecord) -> Score {
    let kinds = |d: &[ConstraintDelta]| -> BTreeMap<DeltaKind, usize> { multiset(d.iter().map(ConstraintDelta::kind)) };
    let kind_matched = overlap(&kinds(&record.gold), &kinds(&record.predicted));
    let gold = multiset(record.gold.iter());
    let predicted = multiset(record.predicted.iter());
    let equal = overlap(&gold, &predicted);
    Score {
        constraint: kind_matched as f64 / record.gold.len() as f64,
        parameter: if kind_matched == 0 { 0.0 } else { equal as f64 / kind_matched as f64 },
        correct: gold == predicted,
    }
}

/// Scores a record set. Every record needs at least one gold delta.
pub fn evaluate(records: &[ExtractionRecord]) -> Result<Metrics, NarrativeError> {
    if let Some(index) = records.iter().position(|r| r.gold.is_empty()) {
        return Err(NarrativeError::EmptyGold { index });
    }
    if records.is_empty() {
        return Ok(Metrics { constraint_accuracy: 0.0, parameter_accuracy: 0.0, correct_rate: 0.0, records: 0 });
    }
    let (c, p, k) = records
        .iter()
        .map(score)
        .fold((0.0, 0.0, 0usize), |(c, p, k), s| (c + s.constraint, p + s.parameter, k + usize::from(s.correct)));
    let n = records.len() as f64;
    Ok(Metrics {
        constraint_accuracy: c / n,
        parameter_accuracy: p / n,
        correct_rate: k as f64 / n,
        records: records.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ConstraintDelta::*;

    fn record(gold: Vec<ConstraintDelta>, predicted: Vec<ConstraintDelta>) -> ExtractionRecord {
        ExtractionRecord { narrative: String::new(), gold, predicted, model: String::new(), latency_ms: 0 }
    }

    #[test]
    fn perfect_and_partial() {
        let a = Duration { task: "T6".into(), minutes: 120 };
        let b = StartTime { task: "T11".into(), shift: 150 };
        let m = evaluate(&[record(vec![a.clone(), b.clone()], vec![b.clone(), a.clone()])]).unwrap();
        assert_eq!((m.constraint_accuracy, m.parameter_accuracy, m.correct_rate), (1.0, 1.0, 1.0));
        let m = evaluate(&[record(vec![a.clone(), b], vec![a])]).unwrap();
        assert_eq!((m.constraint_accuracy, m.parameter_accuracy, m.correct_rate), (0.5, 1.0, 0.0));
    }

    #[test]
    fn duplicates_count() {
        let a = Duration { task: "T13".into(), minutes: 90 };
        let m = evaluate(&[record(vec![a.clone(), a.clone()], vec![a])]).unwrap();
        assert_eq!(m.correct_rate, 0.0);
        assert_eq!(m.constraint_accuracy, 0.5);
    }

    #[test]
    fn empty_gold_is_rejected() {
        let ok = record(vec![Duration { task: "T1".into(), minutes: 5 }], vec![]);
        let err = evaluate(&[ok, record(vec![], vec![])]).unwrap_err();
        assert_eq!(err, NarrativeError::EmptyGold { index: 1 });
    }
}
