//! Extraction through a chat-completion endpoint. Set `FORECREW_LLM_URL`,
//! `FORECREW_LLM_MODEL` and optionally `FORECREW_LLM_TOKEN` to call a live
//! model; otherwise a scripted client answers with the loosely formatted
//! JSON models tend to return (bare task ids, `+2.5`).
//!
//! Usage: `cargo run --example llm_extract -- ["narrative"]`

use std::sync::Arc;

use forecrew::narrative::{build_prompt, Extractor, HttpChatClient, LanguageModelClient, ScriptedClient, TaskKnowledgeBase};

const DEFAULT: &str = "The drilling machine is not functioning, so the wall will be drilled manually and is \
expected to take two hours. The original worker assigned to install the HVAC duct is no longer available; \
however, we have secured another worker who can arrive in 150 minutes.";

fn main() {
    let narrative = std::env::args().nth(1).unwrap_or_else(|| DEFAULT.to_string());
    let kb = TaskKnowledgeBase::case_study();
    let client: Arc<dyn LanguageModelClient> = match HttpChatClient::from_env(None) {
        Ok(client) => Arc::new(client),
        Err(e) => {
            println!("({e}; using a scripted reply)");
            Arc::new(ScriptedClient::new([
                "{\"changes\": [\n{\"constraint_type\": 2, \"parameters\": [T6, 2]},\n{\"constraint_type\": 3, \"parameters\": [T11, +2.5]}\n]}",
            ]))
        }
    };
    let prompt = build_prompt(&kb, &narrative).expect("narrative is not empty");
    println!("model {}, prompt of {} characters", client.model_id(), prompt.len());

    let extractor = Extractor::Model(client);
    match extractor.extract(&narrative, &kb) {
        Ok(extraction) => {
            println!("reply:\n{}", extraction.raw.as_deref().unwrap_or(""));
            for d in &extraction.deltas {
                println!("  -> {d}");
            }
            for d in &extraction.diagnostics {
                println!("  dropped {d}");
            }
        }
        Err(e) => println!("extraction failed: {e}"),
    }
}
