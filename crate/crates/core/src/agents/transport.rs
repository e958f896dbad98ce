//! Chat-completion transports.
//!
//! The wire shape is the common chat-completion one: a POST to
//! `{base_url}/chat/completions` carrying `model`, `messages`, `temperature`,
//! `top_p` and `max_tokens`, answered by `choices[0].message.content`.

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransportConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: u32,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    /// Re-queries allowed when a response cannot be parsed.
    pub parse_retries: u32,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "llama-3.1-8b-instruct".into(),
            temperature: 1.0,
            top_p: 0.9,
            max_new_tokens: 1000,
            api_key_env: "OPENAI_API_KEY".into(),
            max_retries: 3,
            backoff_base_ms: 500,
            parse_retries: 2,
            max_in_flight: 4,
            timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(cfg: &TransportConfig, prompt: &str) -> Self {
        Self {
            model: cfg.model.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.to_string(),
            }],
            temperature: cfg.temperature,
            top_p: cfg.top_p,
            max_tokens: cfg.max_new_tokens,
        }
    }

    /// Content of the final user message.
    pub fn prompt(&self) -> &str {
        self.messages.last().map(|m| m.content.as_str()).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("network error: {0}")]
    Network(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("response carried no completion text")]
    EmptyCompletion,
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted {
        attempts: u32,
        last: Box<TransportError>,
    },
}

impl TransportError {
    fn is_retryable(&self) -> bool {
        match self {
            TransportError::Network(_) | TransportError::EmptyCompletion => true,
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// One request, one attempt. Retries live in [`chat`].
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Sends `prompt`, retrying transient failures with exponential backoff.
pub fn chat(
    cfg: &TransportConfig,
    transport: &dyn ChatTransport,
    prompt: &str,
) -> Result<String, TransportError> {
    let request = ChatRequest::new(cfg, prompt);
    let mut attempt = 0;
    loop {
        let err = match transport.complete(&request) {
            Ok(text) if text.trim().is_empty() => TransportError::EmptyCompletion,
            Ok(text) => return Ok(text),
            Err(e) => e,
        };
        if !err.is_retryable() {
            return Err(err);
        }
        if attempt >= cfg.max_retries {
            return Err(TransportError::Exhausted {
                attempts: attempt + 1,
                last: Box::new(err),
            });
        }
        let wait = cfg.backoff_base_ms.saturating_mul(1 << attempt.min(16));
        log::warn!("chat attempt {} failed ({err}); retrying in {wait} ms", attempt + 1);
        if wait > 0 {
            std::thread::sleep(Duration::from_millis(wait));
        }
        attempt += 1;
    }
}

struct Gate {
    in_flight: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

impl Gate {
    fn enter(&self) -> GateGuard<'_> {
        let mut n = self.in_flight.lock().expect("gate poisoned");
        while *n >= self.cap {
            n = self.freed.wait(n).expect("gate poisoned");
        }
        *n += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("gate poisoned") -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Option<ChoiceMessage>,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

/// Parses `choices[0].message.content` out of a response body.
pub fn parse_completion(body: &str) -> Result<String, TransportError> {
    let resp: CompletionResponse =
        serde_json::from_str(body).map_err(|e| TransportError::Malformed(e.to_string()))?;
    resp.choices
        .into_iter()
        .next()
        .and_then(|c| c.message)
        .and_then(|m| m.content)
        .filter(|s| !s.trim().is_empty())
        .ok_or(TransportError::EmptyCompletion)
}

/// Blocking HTTP transport with a cap on concurrent requests.
pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
    gate: Gate,
}

impl HttpTransport {
    pub fn new(cfg: &TransportConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            url: format!("{}/chat/completions", cfg.base_url.trim_end_matches('/')),
            api_key: std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty()),
            gate: Gate {
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
                cap: cfg.max_in_flight.max(1),
            },
        }
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let _slot = self.gate.enter();
        let mut call = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call
            .send_json(request)
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status { status, body });
        }
        parse_completion(&body)
    }
}

/// Replays a fixed queue of responses and records every prompt it receives.
/// Once the queue is empty the last response repeats.
pub struct ScriptedTransport {
    queue: Mutex<VecDeque<Result<String, TransportError>>>,
    last: Mutex<Option<Result<String, TransportError>>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedTransport {
    pub fn new<I>(responses: I) -> Self
    where
        I: IntoIterator<Item = Result<String, TransportError>>,
    {
        Self {
            queue: Mutex::new(responses.into_iter().collect()),
            last: Mutex::new(None),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn texts<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(texts.into_iter().map(|t| Ok(t.into())))
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("poisoned").clone()
    }

    pub fn calls(&self) -> usize {
        self.prompts.lock().expect("poisoned").len()
    }
}

impl ChatTransport for ScriptedTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.prompts.lock().expect("poisoned").push(request.prompt().to_string());
        let next = self.queue.lock().expect("poisoned").pop_front();
        let mut last = self.last.lock().expect("poisoned");
        match next {
            Some(r) => {
                *last = Some(r.clone());
                r
            }
            None => last
                .clone()
                .unwrap_or_else(|| Err(TransportError::Network("script is empty".into()))),
        }
    }
}

type Responder = dyn Fn(&ChatRequest) -> Result<String, TransportError> + Send + Sync;

/// Computes each response from the request.
pub struct FnTransport(Box<Responder>);

impl FnTransport {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&ChatRequest) -> Result<String, TransportError> + Send + Sync + 'static,
    {
        Self(Box::new(f))
    }
}

impl ChatTransport for FnTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        (self.0)(request)
    }
}

/// Hex SHA-256 of a prompt; the key used by [`FixtureTransport`].
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Serves responses from `<dir>/<prompt-hash>.txt`.
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, prompt: &str) -> PathBuf {
        self.dir.join(format!("{}.txt", prompt_hash(prompt)))
    }
}

impl ChatTransport for FixtureTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let path = self.path_for(request.prompt());
        std::fs::read_to_string(&path).map_err(|e| {
            TransportError::Malformed(format!("no fixture at {}: {e}", path.display()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast(max_retries: u32) -> TransportConfig {
        TransportConfig {
            max_retries,
            backoff_base_ms: 0,
            ..Default::default()
        }
    }

    fn net_err() -> Result<String, TransportError> {
        Err(TransportError::Network("connection reset".into()))
    }

    #[test]
    fn defaults_match_sampling_setup() {
        let c = TransportConfig::default();
        assert_eq!((c.temperature, c.top_p, c.max_new_tokens), (1.0, 0.9, 1000));
    }

    #[test]
    fn mock_returns_canned_fixture() {
        let t = ScriptedTransport::texts(["canned"]);
        assert_eq!(chat(&fast(0), &t, "hello").unwrap(), "canned");
        assert_eq!(t.prompts(), vec!["hello".to_string()]);
    }

    #[test]
    fn retries_then_succeeds() {
        let t = ScriptedTransport::new([net_err(), net_err(), Ok("third time".into())]);
        assert_eq!(chat(&fast(3), &t, "p").unwrap(), "third time");
        assert_eq!(t.calls(), 3);
    }

    #[test]
    fn no_retries_surfaces_error() {
        let t = ScriptedTransport::new([net_err()]);
        let err = chat(&fast(0), &t, "p").unwrap_err();
        assert!(matches!(err, TransportError::Exhausted { attempts: 1, .. }));
    }

    #[test]
    fn client_errors_are_not_retried() {
        let t = ScriptedTransport::new([Err(TransportError::Status { status: 401, body: "no".into() })]);
        assert!(matches!(chat(&fast(5), &t, "p"), Err(TransportError::Status { status: 401, .. })));
        assert_eq!(t.calls(), 1);
    }

    #[test]
    fn empty_completion_counts_as_failure() {
        let t = ScriptedTransport::texts(["  "]);
        let err = chat(&fast(1), &t, "p").unwrap_err();
        match err {
            TransportError::Exhausted { attempts, last } => {
                assert_eq!(attempts, 2);
                assert_eq!(*last, TransportError::EmptyCompletion);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn request_wire_shape() {
        let req = ChatRequest::new(&TransportConfig::default(), "hi");
        let v = serde_json::to_value(&req).unwrap();
        let mut keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        keys.sort();
        assert_eq!(keys, ["max_tokens", "messages", "model", "temperature", "top_p"]);
        assert_eq!(v["messages"][0]["role"], "user");
        assert_eq!(v["messages"][0]["content"], "hi");
    }

    #[test]
    fn completion_parsing() {
        let body = r#"{"choices":[{"index":0,"message":{"role":"assistant","content":"yes"}}]}"#;
        assert_eq!(parse_completion(body).unwrap(), "yes");
        assert_eq!(parse_completion(r#"{"choices":[]}"#).unwrap_err(), TransportError::EmptyCompletion);
        assert!(matches!(parse_completion("nope"), Err(TransportError::Malformed(_))));
    }

    #[test]
    fn fixture_lookup_by_prompt_hash() {
        let dir = tempfile::tempdir().unwrap();
        let t = FixtureTransport::new(dir.path());
        std::fs::write(t.path_for("question"), "answer").unwrap();
        assert_eq!(chat(&fast(0), &t, "question").unwrap(), "answer");
        assert!(matches!(chat(&fast(0), &t, "other"), Err(TransportError::Malformed(_))));
    }
}
