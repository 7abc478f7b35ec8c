//! Narrative-to-constraint mapping: a prompt-driven language-model
//! extractor, a deterministic rule parser for offline use, a seeded corpus
//! generator and the three extraction metrics.

mod client;
mod corpus;
mod extract;
mod kb;
mod metrics;
mod parse;
mod prompt;

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

pub use client::{ChatMessage, HttpChatClient, LanguageModelClient, ScriptedClient, ENV_MODEL, ENV_TOKEN, ENV_URL};
pub use corpus::generate_corpus;
pub use extract::{extract, parse_response, Extraction, FORMAT_REMINDER};
pub use kb::{Mention, RobotEntry, TaskEntry, TaskKnowledgeBase};
pub use metrics::{evaluate, ExtractionRecord, Metrics};
pub use parse::rule_parse;
pub use prompt::{worked_examples, build_prompt, PromptTemplate, PROMPT_BLOCKS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NarrativeError {
    #[error("narrative is empty")]
    EmptyNarrative,
    #[error("language model unavailable: {0}")]
    ClientUnavailable(String),
    #[error("language model reply is not the expected JSON: {0}")]
    ResponseNotJson(String),
    #[error("cannot resolve `{phrase}`: {reason}")]
    UnresolvedReference { phrase: String, reason: String },
    #[error("record {index} has no gold deltas")]
    EmptyGold { index: usize },
}

/// Where deltas come from: the rule parser or a language model.
#[derive(Clone)]
pub enum Extractor {
    Rules,
    Model(Arc<dyn LanguageModelClient>),
}

impl std::fmt::Debug for Extractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Extractor::Rules => f.write_str("Rules"),
            Extractor::Model(c) => write!(f, "Model({})", c.model_id()),
        }
    }
}

impl Extractor {
    pub fn model_id(&self) -> String {
        match self {
            Extractor::Rules => "rules".into(),
            Extractor::Model(c) => c.model_id(),
        }
    }

    pub fn extract(&self, narrative: &str, kb: &TaskKnowledgeBase) -> Result<Extraction, NarrativeError> {
        match self {
            Extractor::Rules => Ok(Extraction { deltas: rule_parse(narrative, kb)?, diagnostics: Vec::new(), raw: None }),
            Extractor::Model(client) => extract(narrative, kb, client.as_ref()),
        }
    }

    /// Re-extracts every corpus narrative, at most `parallelism` at a time.
    /// Failed extractions count as empty predictions.
    pub fn run_corpus(&self, kb: &TaskKnowledgeBase, corpus: &[ExtractionRecord], parallelism: usize) -> Vec<ExtractionRecord> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism.max(1))
            .build()
            .expect("thread pool");
        pool.install(|| {
            corpus
                .par_iter()
                .map(|record| {
                    let started = Instant::now();
                    let predicted = self.extract(&record.narrative, kb).map(|e| e.deltas).unwrap_or_default();
                    ExtractionRecord {
                        narrative: record.narrative.clone(),
                        gold: record.gold.clone(),
                        predicted,
                        model: self.model_id(),
                        latency_ms: started.elapsed().as_millis() as u64,
                    }
                })
                .collect()
        })
    }
}
