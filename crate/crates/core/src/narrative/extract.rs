//! Language-model extraction: prompt, reply parsing and per-entry
//! validation.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{Change, ConstraintDelta};

use super::client::{ChatMessage, LanguageModelClient};
use super::kb::TaskKnowledgeBase;
use super::prompt::build_prompt;
use super::NarrativeError;

pub const FORMAT_REMINDER: &str = "Your previous reply could not be read. Output only the JSON object \
{\"changes\": [{\"constraint_type\": <number>, \"parameters\": [<value1>, <value2>, ...]}]} and nothing else.";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub deltas: Vec<ConstraintDelta>,
    /// One line per dropped entry.
    pub diagnostics: Vec<String>,
    /// The model reply the deltas came from.
    pub raw: Option<String>,
}

/// Named parameter keys per constraint type, in positional order.
const NAMED: [&[&[&str]]; 5] = [
    &[&["task_id"], &["successor", "successors"], &["+/-", "sign", "change"]],
    &[&["task_id"], &["new_duration", "duration"]],
    &[&["task_id"], &["start_time_change", "change"]],
    &[&["robot_type_id", "new_robot_type_id"], &["robot_number_change", "change"]],
    &[&["task_id1"], &["task_id2"]],
];

/// Sends the prompt, re-asks once if the reply is not readable JSON, and
/// keeps every entry that forms a valid delta.
pub fn extract(
    narrative: &str,
    kb: &TaskKnowledgeBase,
    client: &dyn LanguageModelClient,
) -> Result<Extraction, NarrativeError> {
    let mut messages = vec![ChatMessage::user(build_prompt(kb, narrative)?)];
    let reply = client.complete(&messages)?;
    let reply = match parse_response(&reply, kb) {
        Ok((deltas, diagnostics)) => return Ok(Extraction { deltas, diagnostics, raw: Some(reply) }),
        Err(_) => {
            messages.push(ChatMessage::assistant(reply));
            messages.push(ChatMessage::user(FORMAT_REMINDER));
            client.complete(&messages)?
        }
    };
    let (deltas, diagnostics) = parse_response(&reply, kb).map_err(NarrativeError::ResponseNotJson)?;
    Ok(Extraction { deltas, diagnostics, raw: Some(reply) })
}

/// Reads a `{"changes": [...]}` reply. Returns the valid deltas and a
/// diagnostic for each dropped entry, or an error when the reply holds no
/// such object at all.
pub fn parse_response(reply: &str, kb: &TaskKnowledgeBase) -> Result<(Vec<ConstraintDelta>, Vec<String>), String> {
    let (Some(open), Some(close)) = (reply.find('{'), reply.rfind('}')) else {
        return Err("no JSON object in reply".into());
    };
    if close < open {
        return Err("no JSON object in reply".into());
    }
    let body = &reply[open..=close];
    let value: Value = serde_json::from_str(body)
        .or_else(|_| serde_json::from_str(&repair(body)))
        .map_err(|e| format!("{e}"))?;
    let changes = value
        .get("changes")
        .and_then(Value::as_array)
        .ok_or_else(|| "reply has no `changes` array".to_string())?;

    let mut deltas = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, entry) in changes.iter().enumerate() {
        match entry_delta(entry).and_then(|d| d.validate(kb.instance()).map(|_| d).map_err(|e| e.to_string())) {
            Ok(d) => deltas.push(d),
            Err(e) => diagnostics.push(format!("change {}: {e}: {entry}", i + 1)),
        }
    }
    Ok((deltas, diagnostics))
}

fn entry_delta(entry: &Value) -> Result<ConstraintDelta, String> {
    let kind = match entry.get("constraint_type") {
        Some(Value::Number(n)) => n.as_u64(),
        Some(Value::String(s)) => s.trim().parse().ok(),
        _ => None,
    }
    .filter(|k| (1..=5).contains(k))
    .ok_or_else(|| "missing or unknown constraint_type".to_string())? as u8;
    let parameters = match entry.get("parameters") {
        Some(Value::Array(items)) => items.clone(),
        Some(Value::Object(map)) => NAMED[usize::from(kind) - 1]
            .iter()
            .map(|keys| {
                keys.iter()
                    .find_map(|k| map.get(*k))
                    .cloned()
                    .ok_or_else(|| format!("parameter `{}` is missing", keys[0]))
            })
            .collect::<Result<_, _>>()?,
        _ => return Err("missing parameters".into()),
    };
    if parameters.iter().any(|p| p.is_array() || p.is_object()) {
        return Err("parameters must not be nested".into());
    }
    ConstraintDelta::from_change(&Change { constraint_type: kind, parameters }).map_err(|e| e.to_string())
}

/// Makes near-JSON readable: bare identifiers such as `T6` are quoted,
/// `+2.5` loses its plus sign, a lone `+` or `-` becomes a string and
/// single-quoted strings become double-quoted.
fn repair(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len() + 16);
    let mut i = 0;
    let next_non_space = |from: usize| chars[from..].iter().copied().find(|c| !c.is_whitespace());
    while i < chars.len() {
        let c = chars[i];
        match c {
            '"' | '\'' => {
                out.push('"');
                i += 1;
                while i < chars.len() && chars[i] != c {
                    if chars[i] == '\\' && i + 1 < chars.len() {
                        out.push(chars[i]);
                        i += 1;
                    } else if chars[i] == '"' {
                        out.push('\\');
                    }
                    out.push(chars[i]);
                    i += 1;
                }
                out.push('"');
                i += 1;
            }
            '+' | '-' | '\u{2212}' => {
                let follows = chars.get(i + 1).copied();
                if follows.is_some_and(|f| f.is_ascii_digit() || f == '.') {
                    if c != '+' {
                        out.push('-');
                    }
                } else if matches!(next_non_space(i + 1), Some(',') | Some(']') | Some('}') | None) {
                    out.push_str(if c == '+' { "\"+\"" } else { "\"-\"" });
                } else {
                    out.push(c);
                }
                i += 1;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '_' | '#' | '.')) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                if matches!(word.as_str(), "true" | "false" | "null") {
                    out.push_str(&word);
                } else {
                    out.push('"');
                    out.push_str(&word);
                    out.push('"');
                }
            }
            c => {
                out.push(c);
                i += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narrative::client::ScriptedClient;
    use crate::narrative::prompt::worked_examples;
    use ConstraintDelta::*;

    fn kb() -> TaskKnowledgeBase {
        TaskKnowledgeBase::case_study()
    }

    #[test]
    fn printed_example_outputs_are_readable() {
        let printed = [
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
        for (reply, (_, gold)) in printed.iter().zip(worked_examples()) {
            let (deltas, diagnostics) = parse_response(reply, &kb()).unwrap();
            assert!(diagnostics.is_empty(), "{diagnostics:?}");
            assert_eq!(deltas, gold);
        }
    }

    #[test]
    fn fenced_reply_with_bare_sign() {
        let reply = "```json\n{\"changes\": [{\"constraint_type\": 1, \"parameters\": [T13, T9, +]}]}\n```";
        let (deltas, _) = parse_response(reply, &kb()).unwrap();
        assert_eq!(
            deltas,
            [Dependency { task: "T13".into(), successor: "T9".into(), sign: crate::model::DependencySign::Add }]
        );
    }

    #[test]
    fn named_parameters_accept_both_robot_keys() {
        for key in ["robot_type_id", "new_robot_type_id"] {
            let reply = format!(r#"{{"changes":[{{"constraint_type":4,"parameters":{{"{key}":"R6","robot_number_change":-1}}}}]}}"#);
            let (deltas, _) = parse_response(&reply, &kb()).unwrap();
            assert_eq!(deltas, [RobotCount { robot_type: "R6".into(), change: -1 }]);
        }
    }

    #[test]
    fn invalid_entries_are_dropped_with_diagnostics() {
        let reply = r#"{"changes":[
            {"constraint_type":3,"parameters":["T6",1]},
            {"constraint_type":3,"parameters":["T99",1]},
            {"constraint_type":1,"parameters":["T1",["T7","T12"],"+"]},
            {"constraint_type":9,"parameters":[]}
        ]}"#;
        let (deltas, diagnostics) = parse_response(reply, &kb()).unwrap();
        assert_eq!(deltas, [StartTime { task: "T6".into(), shift: 60 }]);
        assert_eq!(diagnostics.len(), 3);
        assert!(diagnostics[0].contains("T99"));
    }

    #[test]
    fn one_reask_then_failure() {
        let client = ScriptedClient::new(["Sure! Here you go.", r#"{"changes": []}"#]);
        let got = extract("drill late", &kb(), &client).unwrap();
        assert!(got.deltas.is_empty());
        let received = client.received.lock().unwrap();
        assert_eq!(received.len(), 2);
        assert_eq!(received[1].last().unwrap().content, FORMAT_REMINDER);
        drop(received);

        let client = ScriptedClient::new(["no", "still no"]);
        assert!(matches!(extract("drill late", &kb(), &client), Err(NarrativeError::ResponseNotJson(_))));
    }

    #[test]
    fn arriving_late_through_a_model() {
        let client = ScriptedClient::new([r#"{"changes": [{"constraint_type": 3, "parameters": ["T6", "+1"]}]}"#]);
        let got = extract("The wall-drilling worker will be arriving an hour late.", &kb(), &client).unwrap();
        assert_eq!(got.deltas, [StartTime { task: "T6".into(), shift: 60 }]);
        let prompt = &client.received.lock().unwrap()[0][0].content;
        assert!(prompt.contains("arriving an hour late"));
    }
}
