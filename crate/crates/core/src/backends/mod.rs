//! Inference clients and the structured-output parser.

mod http;
pub mod parse;

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{ChatCompletionRequest, ChatCompletionResponse, HttpBackend};
pub use parse::{parse_decision, ParseFailure, ParseMethod, ParsedDecision};

pub const SYSTEM_PROMPT: &str = "You are a helpful assistant playing a board game.";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("prompt must not be empty")]
    EmptyPrompt,
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("unexpected response body: {0}")]
    Protocol(String),
    #[error("scripted backend has no responses left")]
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpOpenaiCompatible,
    ScriptedMock,
}

fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_in_flight() -> usize {
    4
}
fn default_backoff() -> f64 {
    0.5
}

/// Where and how to reach a model. The model name itself travels with the
/// agent descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendRef {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    /// `env:VAR_NAME`; raw secrets are rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// First retry delay; doubles per attempt.
    #[serde(default = "default_backoff")]
    pub backoff_base_s: f64,
    /// Replies of a scripted backend, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub responses: Vec<String>,
}

impl BackendRef {
    pub fn scripted<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            kind: BackendKind::ScriptedMock,
            base_url: None,
            api_key: None,
            timeout_s: default_timeout(),
            max_retries: default_retries(),
            max_in_flight: default_in_flight(),
            backoff_base_s: default_backoff(),
            responses: responses.into_iter().map(Into::into).collect(),
        }
    }

    pub fn http(base_url: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::HttpOpenaiCompatible,
            base_url: Some(base_url.into()),
            ..Self::scripted(Vec::<String>::new())
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(BackendError::Config("timeout_s must be positive".into()));
        }
        if self.max_in_flight == 0 {
            return Err(BackendError::Config("max_in_flight must be at least 1".into()));
        }
        if !(self.backoff_base_s >= 0.0 && self.backoff_base_s.is_finite()) {
            return Err(BackendError::Config("backoff_base_s must be non-negative".into()));
        }
        if let Some(key) = &self.api_key {
            if !key.starts_with("env:") {
                return Err(BackendError::Config(
                    "api_key must be an `env:VAR_NAME` reference".into(),
                ));
            }
        }
        if self.kind == BackendKind::HttpOpenaiCompatible && self.base_url.is_none() {
            return Err(BackendError::Config("http backend requires base_url".into()));
        }
        Ok(())
    }

    /// Looks up the referenced environment variable.
    pub fn resolve_api_key(&self) -> Result<Option<String>, BackendError> {
        match self.api_key.as_deref() {
            None => Ok(None),
            Some(r) => {
                let var = r
                    .strip_prefix("env:")
                    .ok_or_else(|| BackendError::Config("api_key must start with env:".into()))?;
                std::env::var(var)
                    .map(Some)
                    .map_err(|_| BackendError::Config(format!("environment variable {var} is not set")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

pub fn to_chat_messages(prompt: &str) -> Result<Vec<ChatMessage>, BackendError> {
    if prompt.is_empty() {
        return Err(BackendError::EmptyPrompt);
    }
    Ok(vec![
        ChatMessage {
            role: "system".into(),
            content: SYSTEM_PROMPT.into(),
        },
        ChatMessage {
            role: "user".into(),
            content: prompt.into(),
        },
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub text: String,
    /// Retries spent before the successful attempt.
    pub retries: u32,
}

pub trait Backend: Send + Sync {
    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<Generation, BackendError>;
}

/// Replays a fixed list of replies.
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<String>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
        }
    }
}

impl Backend for ScriptedBackend {
    fn generate(&self, prompt: &str, _params: &GenerationParams) -> Result<Generation, BackendError> {
        if prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let text = self
            .queue
            .lock()
            .expect("queue lock")
            .pop_front()
            .ok_or(BackendError::Exhausted)?;
        Ok(Generation { text, retries: 0 })
    }
}

/// Hands out backends for agents. HTTP clients are shared per distinct
/// configuration so the in-flight bound holds across episodes; scripted
/// backends are fresh per call so every episode replays its script from
/// the start.
#[derive(Default)]
pub struct BackendPool {
    http: Mutex<HashMap<String, Arc<HttpBackend>>>,
}

impl BackendPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, backend: &BackendRef) -> Result<Arc<dyn Backend>, BackendError> {
        backend.validate()?;
        match backend.kind {
            BackendKind::ScriptedMock => Ok(Arc::new(ScriptedBackend::new(backend.responses.clone()))),
            BackendKind::HttpOpenaiCompatible => {
                let key = serde_json::to_string(backend).expect("serialisable");
                let mut http = self.http.lock().expect("pool lock");
                if let Some(b) = http.get(&key) {
                    return Ok(b.clone());
                }
                let client = Arc::new(HttpBackend::new(backend)?);
                http.insert(key, client.clone());
                Ok(client)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> GenerationParams {
        GenerationParams {
            model: "m".into(),
            temperature: 0.0,
            max_tokens: 16,
        }
    }

    #[test]
    fn chat_messages_shape() {
        let m = to_chat_messages("board ✕ ○").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].role, "system");
        assert_eq!(m[0].content, "You are a helpful assistant playing a board game.");
        assert_eq!(m[1].content, "board ✕ ○");
        assert!(matches!(to_chat_messages(""), Err(BackendError::EmptyPrompt)));
    }

    #[test]
    fn scripted_replays_in_order() {
        let b = ScriptedBackend::new(["a", "b"]);
        assert_eq!(b.generate("p", &params()).unwrap().text, "a");
        assert_eq!(b.generate("p", &params()).unwrap().text, "b");
        assert!(matches!(b.generate("p", &params()), Err(BackendError::Exhausted)));
    }

    #[test]
    fn pool_gives_fresh_scripts() {
        let pool = BackendPool::new();
        let r = BackendRef::scripted(["x"]);
        assert_eq!(pool.get(&r).unwrap().generate("p", &params()).unwrap().text, "x");
        assert_eq!(pool.get(&r).unwrap().generate("p", &params()).unwrap().text, "x");
    }

    #[test]
    fn raw_secrets_are_rejected() {
        let mut r = BackendRef::http("http://localhost:1");
        r.api_key = Some("sk-123".into());
        assert!(matches!(r.validate(), Err(BackendError::Config(_))));
        r.api_key = Some("env:ARENA_TEST_UNSET_VAR".into());
        assert!(r.validate().is_ok());
        assert!(r.resolve_api_key().is_err());
    }

    #[test]
    fn invalid_limits() {
        let mut r = BackendRef::http("http://localhost:1");
        r.max_in_flight = 0;
        assert!(r.validate().is_err());
        let mut r = BackendRef::http("http://localhost:1");
        r.timeout_s = 0.0;
        assert!(r.validate().is_err());
    }
}
