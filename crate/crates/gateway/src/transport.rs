use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::request::{request_digest, ChatRequest, Part};
use crate::GatewayError;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TransportError {
    /// Worth retrying: rate limits, server errors, timeouts.
    #[error("transient: {0}")]
    Transient(String),
    #[error("fatal: {0}")]
    Fatal(String),
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// One recorded exchange in a fixtures file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub request_digest: String,
    pub response_text: String,
}

/// Replays recorded responses keyed by request digest.
#[derive(Debug, Default)]
pub struct MockTransport {
    responses: HashMap<String, String>,
}

impl MockTransport {
    pub fn new(fixtures: impl IntoIterator<Item = Fixture>) -> Self {
        Self {
            responses: fixtures.into_iter().map(|f| (f.request_digest, f.response_text)).collect(),
        }
    }

    /// Reads a JSONL fixtures file; blank lines are skipped.
    pub fn from_file(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path).map_err(|e| GatewayError::Fixtures(format!("{}: {e}", path.display())))?;
        let mut fixtures = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Fixture = serde_json::from_str(line)
                .map_err(|e| GatewayError::Fixtures(format!("{}:{}: {e}", path.display(), i + 1)))?;
            fixtures.push(f);
        }
        Ok(Self::new(fixtures))
    }

    pub fn insert(&mut self, request: &ChatRequest, response: impl Into<String>) {
        self.responses.insert(request_digest(request), response.into());
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Transport for MockTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let digest = request_digest(request);
        self.responses
            .get(&digest)
            .cloned()
            .ok_or_else(|| TransportError::Fatal(format!("no fixture for request {digest}")))
    }
}

/// Returns queued results in order, regardless of the request.
#[derive(Debug, Default)]
pub struct ScriptedTransport {
    queue: Mutex<std::collections::VecDeque<Result<String, TransportError>>>,
    calls: Mutex<Vec<ChatRequest>>,
}

impl ScriptedTransport {
    pub fn new(script: impl IntoIterator<Item = Result<String, TransportError>>) -> Self {
        Self {
            queue: Mutex::new(script.into_iter().collect()),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<ChatRequest> {
        self.calls.lock().unwrap().clone()
    }
}

impl Transport for ScriptedTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.calls.lock().unwrap().push(request.clone());
        self.queue
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::Fatal("script exhausted".into())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub api_key: String,
    pub model: String,
    pub timeout: Duration,
    /// Base directory for relative image paths.
    pub image_root: PathBuf,
}

impl GatewayConfig {
    pub const ENDPOINT_VAR: &'static str = "EGOQA_LLM_ENDPOINT";
    pub const KEY_VAR: &'static str = "EGOQA_LLM_API_KEY";
    pub const MODEL_VAR: &'static str = "EGOQA_LLM_MODEL";

    pub fn from_env() -> Result<Self, GatewayError> {
        let var = |k: &str| std::env::var(k).map_err(|_| GatewayError::Config(format!("{k} is not set")));
        Ok(Self {
            endpoint: var(Self::ENDPOINT_VAR)?,
            api_key: var(Self::KEY_VAR)?,
            model: var(Self::MODEL_VAR)?,
            timeout: Duration::from_secs(120),
            image_root: PathBuf::from("."),
        })
    }
}

/// Live OpenAI-compatible chat-completions client.
pub struct HttpTransport {
    config: GatewayConfig,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(config: GatewayConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    fn inline_images(&self, request: &ChatRequest) -> Result<ChatRequest, TransportError> {
        let mut req = request.clone();
        for part in req.messages.iter_mut().flat_map(|m| m.content.iter_mut()) {
            if let Part::ImageUrl { image_url } = part {
                if image_url.url.starts_with("data:") || image_url.url.starts_with("http") {
                    continue;
                }
                let path = self.config.image_root.join(&image_url.url);
                let bytes = std::fs::read(&path).map_err(|e| TransportError::Fatal(format!("{}: {e}", path.display())))?;
                let mime = match path.extension().and_then(|e| e.to_str()) {
                    Some("png") => "image/png",
                    _ => "image/jpeg",
                };
                image_url.url = format!("data:{mime};base64,{}", base64::engine::general_purpose::STANDARD.encode(bytes));
            }
        }
        Ok(req)
    }
}

fn reply_text(body: &serde_json::Value) -> Option<String> {
    body.pointer("/choices/0/message/content")?.as_str().map(str::to_string)
}

impl Transport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, TransportError> {
        request.validate(&self.config.image_root).map_err(TransportError::Fatal)?;
        let wire = self.inline_images(request)?;
        let resp = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(&wire);
        let mut resp = match resp {
            Ok(r) => r,
            Err(e @ (ureq::Error::Timeout(_) | ureq::Error::Io(_) | ureq::Error::ConnectionFailed)) => {
                return Err(TransportError::Transient(e.to_string()))
            }
            Err(e) => return Err(TransportError::Fatal(e.to_string())),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(TransportError::Transient(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(TransportError::Fatal(format!("HTTP {status}")));
        }
        let body: serde_json::Value = resp.body_mut().read_json().map_err(|e| TransportError::Transient(e.to_string()))?;
        reply_text(&body).ok_or_else(|| TransportError::Fatal("response has no message content".into()))
    }
}
