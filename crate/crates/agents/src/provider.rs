//! Chat-completion providers: one HTTP client and one scriptable mock.

use crate::prompts::Role;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Speaker,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Speaker::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Speaker::Assistant,
            content: content.into(),
        }
    }
}

/// Everything an agent call sends: the assembled system prompt, the agent's
/// earlier exchanges on the same step, the formatted input and the schema the
/// answer has to follow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProviderRequest {
    pub agent: Role,
    pub step_id: String,
    pub system: String,
    pub context: Vec<ChatMessage>,
    pub input: String,
    pub schema: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider configuration: {0}")]
    Config(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("provider answered {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected provider payload: {0}")]
    Payload(String),
    #[error("no scripted response left for {0}")]
    Exhausted(Role),
}

pub trait Provider: Send + Sync {
    fn send(&self, request: &ProviderRequest) -> Result<String, ProviderError>;
}

/// OpenAI-style chat-completion endpoint with a JSON-schema response format.
pub struct HttpProvider {
    pub endpoint: String,
    pub model: String,
    api_key: Option<String>,
    timeout: Duration,
    // Built on first use so construction is safe inside an async runtime.
    client: OnceLock<reqwest::blocking::Client>,
}

pub const ENV_ENDPOINT: &str = "GOALSCOPE_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "GOALSCOPE_LLM_API_KEY";
pub const ENV_MODEL: &str = "GOALSCOPE_LLM_MODEL";
pub const ENV_TIMEOUT: &str = "GOALSCOPE_LLM_TIMEOUT_SECS";

impl HttpProvider {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Self {
        HttpProvider {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key,
            timeout,
            client: OnceLock::new(),
        }
    }

    /// Reads endpoint, credential, model and timeout from the environment.
    pub fn from_env() -> Result<Self, ProviderError> {
        let endpoint =
            std::env::var(ENV_ENDPOINT).unwrap_or_else(|_| "https://api.openai.com/v1/chat/completions".to_string());
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "gpt-4.1-mini".to_string());
        let api_key = std::env::var(ENV_API_KEY).ok();
        let secs = match std::env::var(ENV_TIMEOUT) {
            Ok(s) => s
                .parse::<u64>()
                .map_err(|_| ProviderError::Config(format!("{ENV_TIMEOUT} is not a number: {s}")))?,
            Err(_) => 60,
        };
        Ok(HttpProvider::new(&endpoint, &model, api_key, Duration::from_secs(secs)))
    }

    /// Wire body: system message, prior exchanges, then the input.
    pub fn body(&self, request: &ProviderRequest) -> Value {
        let mut messages = vec![json!({"role": "system", "content": request.system})];
        messages.extend(
            request
                .context
                .iter()
                .map(|m| json!({"role": m.role, "content": m.content})),
        );
        messages.push(json!({"role": "user", "content": request.input}));
        json!({
            "model": self.model,
            "messages": messages,
            "response_format": {
                "type": "json_schema",
                "json_schema": {"name": request.agent.stem(), "strict": true, "schema": request.schema},
            },
        })
    }

    fn client(&self) -> Result<&reqwest::blocking::Client, ProviderError> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let c = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(self.client.get_or_init(|| c))
    }
}

/// The first choice's message content.
pub fn completion_content(v: &Value) -> Result<String, ProviderError> {
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ProviderError::Payload("missing choices[0].message.content".into()))
}

impl Provider for HttpProvider {
    fn send(&self, request: &ProviderRequest) -> Result<String, ProviderError> {
        let mut req = self.client()?.post(&self.endpoint).json(&self.body(request));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError::Status {
                status: status.as_u16(),
                body: text,
            });
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| ProviderError::Payload(e.to_string()))?;
        completion_content(&v)
    }
}

type Handler = Box<dyn Fn(&ProviderRequest) -> Result<String, ProviderError> + Send + Sync>;

/// Answers from per-agent queues, then from an optional handler, and keeps
/// every request it saw.
#[derive(Default)]
pub struct MockProvider {
    queues: Mutex<HashMap<Role, VecDeque<Result<String, ProviderError>>>>,
    handler: Option<Handler>,
    seen: Mutex<Vec<ProviderRequest>>,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_handler(
        handler: impl Fn(&ProviderRequest) -> Result<String, ProviderError> + Send + Sync + 'static,
    ) -> Self {
        MockProvider {
            handler: Some(Box::new(handler)),
            ..Self::default()
        }
    }

    pub fn push(&self, role: Role, response: impl Into<String>) -> &Self {
        self.push_result(role, Ok(response.into()))
    }

    pub fn push_result(&self, role: Role, response: Result<String, ProviderError>) -> &Self {
        self.queues
            .lock()
            .expect("mock queue poisoned")
            .entry(role)
            .or_default()
            .push_back(response);
        self
    }

    pub fn pending(&self, role: Role) -> usize {
        self.queues
            .lock()
            .expect("mock queue poisoned")
            .get(&role)
            .map_or(0, VecDeque::len)
    }

    /// Drops every queued response.
    pub fn clear(&self) {
        self.queues.lock().expect("mock queue poisoned").clear();
    }

    pub fn requests(&self) -> Vec<ProviderRequest> {
        self.seen.lock().expect("mock log poisoned").clone()
    }
}

impl Provider for MockProvider {
    fn send(&self, request: &ProviderRequest) -> Result<String, ProviderError> {
        self.seen.lock().expect("mock log poisoned").push(request.clone());
        let queued = self
            .queues
            .lock()
            .expect("mock queue poisoned")
            .get_mut(&request.agent)
            .and_then(VecDeque::pop_front);
        match (queued, &self.handler) {
            (Some(r), _) => r,
            (None, Some(h)) => h(request),
            (None, None) => Err(ProviderError::Exhausted(request.agent)),
        }
    }
}

/// Appends one JSON line per call (request plus response or error) to a file.
pub struct LoggedProvider<P> {
    inner: P,
    log: Mutex<File>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct LogLine<'a> {
    unix_ms: u128,
    request: &'a ProviderRequest,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl<P: Provider> LoggedProvider<P> {
    pub fn new(inner: P, path: &Path) -> std::io::Result<Self> {
        let log = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(LoggedProvider {
            inner,
            log: Mutex::new(log),
        })
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: Provider> Provider for LoggedProvider<P> {
    fn send(&self, request: &ProviderRequest) -> Result<String, ProviderError> {
        let result = self.inner.send(request);
        let line = LogLine {
            unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis()),
            request,
            response: result.as_ref().ok().map(String::as_str),
            error: result.as_ref().err().map(ToString::to_string),
        };
        if let Ok(text) = serde_json::to_string(&line) {
            let mut f = self.log.lock().expect("request log poisoned");
            // An unwritable audit log must not take the conversation down.
            let _ = writeln!(f, "{text}");
        }
        result
    }
}
