//! Blocking client for OpenAI-compatible `/chat/completions` endpoints.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::Rng;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{to_chat_messages, Backend, BackendError, BackendRef, ChatMessage, Generation, GenerationParams};

const MAX_RETRY_AFTER_S: f64 = 60.0;

#[derive(Debug, Clone, Serialize)]
pub struct ChatCompletionRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChatCompletionResponse {
    pub choices: Vec<Choice>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Choice {
    pub message: ResponseMessage,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ResponseMessage {
    #[serde(default)]
    pub content: Option<String>,
}

impl ChatCompletionResponse {
    /// Assistant text of the first choice.
    pub fn decode(body: &str) -> Result<String, BackendError> {
        let parsed: ChatCompletionResponse =
            serde_json::from_str(body).map_err(|e| BackendError::Protocol(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content.unwrap_or_default())
            .ok_or_else(|| BackendError::Protocol("response has no choices".into()))
    }
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("gate lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate lock");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate lock") += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpBackend {
    client: Client,
    endpoint: String,
    api_key: Option<String>,
    max_retries: u32,
    backoff_base: f64,
    gate: Gate,
}

enum Attempt {
    Done(String),
    Retry { message: String, wait: Option<f64> },
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(backend: &BackendRef) -> Result<Self, BackendError> {
        backend.validate()?;
        let base = backend
            .base_url
            .as_deref()
            .ok_or_else(|| BackendError::Config("http backend requires base_url".into()))?;
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(backend.timeout_s))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: format!("{}/chat/completions", base.trim_end_matches('/')),
            api_key: backend.resolve_api_key()?,
            max_retries: backend.max_retries,
            backoff_base: backend.backoff_base_s,
            gate: Gate::new(backend.max_in_flight),
        })
    }

    fn attempt(&self, body: &ChatCompletionRequest) -> Attempt {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry {
                    message: e.to_string(),
                    wait: None,
                }
            }
        };
        let status = resp.status();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(|s| s.min(MAX_RETRY_AFTER_S));
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry {
                    message: e.to_string(),
                    wait: None,
                }
            }
        };
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Attempt::Retry {
                message: format!("HTTP {status}"),
                wait: retry_after,
            };
        }
        if !status.is_success() {
            return Attempt::Fatal(BackendError::Transport {
                attempts: 1,
                message: format!("HTTP {status}: {}", truncate(&text, 200)),
            });
        }
        match ChatCompletionResponse::decode(&text) {
            Ok(content) => Attempt::Done(content),
            Err(e) => Attempt::Fatal(e),
        }
    }

    fn backoff(&self, retry: u32) -> Duration {
        let base = self.backoff_base * 2f64.powi(retry as i32);
        let jitter = rand::rng().random_range(0.0..=0.25);
        Duration::from_secs_f64(base * (1.0 + jitter))
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

impl Backend for HttpBackend {
    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<Generation, BackendError> {
        let body = ChatCompletionRequest {
            model: params.model.clone(),
            messages: to_chat_messages(prompt)?,
            temperature: params.temperature,
            max_tokens: params.max_tokens,
        };
        let _permit = self.gate.acquire();
        let mut retries = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(Generation { text, retries }),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry { message, wait } => {
                    if retries >= self.max_retries {
                        return Err(BackendError::Transport {
                            attempts: retries + 1,
                            message,
                        });
                    }
                    let mut delay = self.backoff(retries);
                    if let Some(w) = wait {
                        delay = delay.max(Duration::from_secs_f64(w));
                    }
                    tracing::debug!(retry = retries + 1, ?delay, %message, "retrying chat completion");
                    std::thread::sleep(delay);
                    retries += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_standard_body() {
        let body = r#"{"id":"x","object":"chat.completion","choices":[{"index":0,"message":{"role":"assistant","content":"{\"action\": 1}"},"finish_reason":"stop"}]}"#;
        assert_eq!(ChatCompletionResponse::decode(body).unwrap(), "{\"action\": 1}");
    }

    #[test]
    fn rejects_non_json_and_empty_choices() {
        assert!(matches!(ChatCompletionResponse::decode("<html>"), Err(BackendError::Protocol(_))));
        assert!(matches!(
            ChatCompletionResponse::decode(r#"{"choices":[]}"#),
            Err(BackendError::Protocol(_))
        ));
    }

    #[test]
    fn backoff_doubles() {
        let b = HttpBackend::new(&BackendRef::http("http://127.0.0.1:9")).unwrap();
        let d0 = b.backoff(0).as_secs_f64();
        let d2 = b.backoff(2).as_secs_f64();
        assert!((0.5..=0.625).contains(&d0));
        assert!((2.0..=2.5).contains(&d2));
    }
}
