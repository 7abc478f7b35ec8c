//! Chat-completion clients.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::NarrativeError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: content.into() }
    }
}

pub trait LanguageModelClient: Send + Sync {
    /// Sends a conversation and returns the reply text.
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, NarrativeError>;

    fn model_id(&self) -> String;
}

pub const ENV_URL: &str = "FORECREW_LLM_URL";
pub const ENV_TOKEN: &str = "FORECREW_LLM_TOKEN";
pub const ENV_MODEL: &str = "FORECREW_LLM_MODEL";

/// An OpenAI-style `chat/completions` endpoint.
#[derive(Debug, Clone)]
pub struct HttpChatClient {
    pub url: String,
    pub model: String,
    pub token: Option<String>,
    pub timeout: Duration,
}

impl HttpChatClient {
    pub fn new(url: impl Into<String>, model: impl Into<String>, token: Option<String>) -> Self {
        Self { url: url.into(), model: model.into(), token, timeout: Duration::from_secs(120) }
    }

    /// Reads `FORECREW_LLM_URL`, `FORECREW_LLM_MODEL` and the optional
    /// `FORECREW_LLM_TOKEN`. `model` overrides the environment.
    pub fn from_env(model: Option<&str>) -> Result<Self, NarrativeError> {
        let url = std::env::var(ENV_URL)
            .map_err(|_| NarrativeError::ClientUnavailable(format!("{ENV_URL} is not set")))?;
        let model = match model {
            Some(m) => m.to_string(),
            None => std::env::var(ENV_MODEL)
                .map_err(|_| NarrativeError::ClientUnavailable(format!("{ENV_MODEL} is not set")))?,
        };
        Ok(Self::new(url, model, std::env::var(ENV_TOKEN).ok()))
    }
}

impl LanguageModelClient for HttpChatClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, NarrativeError> {
        let unavailable = |e: reqwest::Error| NarrativeError::ClientUnavailable(e.to_string());
        let client = reqwest::blocking::Client::builder().timeout(self.timeout).build().map_err(unavailable)?;
        let mut request = client
            .post(&self.url)
            .json(&json!({ "model": self.model, "messages": messages, "temperature": 0 }));
        if let Some(token) = &self.token {
            request = request.bearer_auth(token);
        }
        let response = request.send().map_err(unavailable)?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(NarrativeError::ClientUnavailable(format!("{status}: {}", body.chars().take(300).collect::<String>())));
        }
        let body: serde_json::Value = response.json().map_err(unavailable)?;
        body.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| NarrativeError::ClientUnavailable("reply has no choices[0].message.content".into()))
    }

    fn model_id(&self) -> String {
        self.model.clone()
    }
}

/// Returns canned replies in order; for tests and offline demos.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    replies: Mutex<VecDeque<String>>,
    /// Every conversation received, oldest first.
    pub received: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedClient {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { replies: Mutex::new(replies.into_iter().map(Into::into).collect()), received: Mutex::default() }
    }
}

impl LanguageModelClient for ScriptedClient {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, NarrativeError> {
        self.received.lock().expect("not poisoned").push(messages.to_vec());
        self.replies
            .lock()
            .expect("not poisoned")
            .pop_front()
            .ok_or_else(|| NarrativeError::ClientUnavailable("scripted client has no replies left".into()))
    }

    fn model_id(&self) -> String {
        "scripted".into()
    }
}
