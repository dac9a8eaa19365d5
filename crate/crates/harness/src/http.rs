//! OpenAI-compatible chat-completions client.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use stateact_core::backend::{apply_stop, BackendError};
use stateact_core::{CompletionRequest, ModelBackend};

fn default_timeout() -> u64 {
    120
}

/// Connection settings. The token itself never lives here, only the name of
/// the environment variable holding it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Environment variable read for the bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Extra attempts after a transport error or a 5xx status. Zero by default.
    #[serde(default)]
    pub retries: u32,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self { endpoint: endpoint.into(), model: model.into(), token_env: None, timeout_secs: default_timeout(), retries: 0 }
    }
}

pub struct HttpBackend {
    agent: ureq::Agent,
    config: HttpConfig,
    token: Option<String>,
}

impl fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.config.endpoint)
            .field("model", &self.config.model)
            .field("token", &self.token.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HttpSetupError {
    #[error("environment variable {0} is not set")]
    MissingToken(String),
}

impl HttpBackend {
    /// Reads the token from the configured environment variable, if any.
    pub fn new(config: HttpConfig) -> Result<Self, HttpSetupError> {
        let token = match &config.token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| HttpSetupError::MissingToken(var.clone()))?),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { agent, config, token })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    /// The JSON body sent for a request: one user message, no system message.
    pub fn request_body(&self, request: &CompletionRequest) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "top_p": request.top_p,
            "stop": request.stop,
            "max_tokens": request.max_tokens,
        });
        if let Some(seed) = request.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn attempt(&self, body: &Value) -> Result<String, BackendError> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(body).map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| BackendError::Transport(e.to_string()))?;
        if status != 200 {
            return Err(BackendError::Status { status, body: text });
        }
        extract_content(&text)
    }
}

/// Pulls the first choice's text out of a chat-completions response.
pub fn extract_content(body: &str) -> Result<String, BackendError> {
    let v: Value = serde_json::from_str(body).map_err(|e| BackendError::MalformedBody(e.to_string()))?;
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| BackendError::MalformedBody("no choices".into()))?;
    choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::MalformedBody("first choice has no text".into()))
}

fn retryable(e: &BackendError) -> bool {
    match e {
        BackendError::Transport(_) => true,
        BackendError::Status { status, .. } => *status >= 500 || *status == 429,
        _ => false,
    }
}

impl ModelBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let body = self.request_body(request);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => return Ok(apply_stop(&text, &request.stop).to_string()),
                Err(e) if attempt < self.config.retries && retryable(&e) => {
                    attempt += 1;
                    let key = request.key.as_ref().map(|k| format!("{}:{}", k.episode, k.step)).unwrap_or_default();
                    log::warn!("retrying request {key} after attempt {attempt} failed: {e}");
                }
                Err(e) => return Err(e),
            }
        }
    }
}
