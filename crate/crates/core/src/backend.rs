//! Model backends: the completion request, stop handling, and the in-process
//! backends (scripted, closure, oracle). HTTP and replay live in the harness.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cell::{Cell, RefCell};

use serde::{Deserialize, Serialize};

use crate::codec::serialize_context;
use crate::context::{AgentContext, AgentVariant};
use crate::env::{Environment, SharedEnv};
use crate::goal::extract_goal;

pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_TOP_P: f64 = 1.0;
pub const DEFAULT_STOP: &str = "\n\n";
pub const DEFAULT_MAX_TOKENS: u32 = 2000;

/// Whether a request asks for a context block or for a decomposition plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequestKind {
    #[default]
    Act,
    Plan,
}

/// Identifies a request for keyed replay.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RequestKey {
    pub episode: String,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub stop: Vec<String>,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip)]
    pub kind: RequestKind,
    #[serde(skip)]
    pub key: Option<RequestKey>,
}

impl CompletionRequest {
    /// Greedy decoding with the blank-line stop.
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            temperature: DEFAULT_TEMPERATURE,
            top_p: DEFAULT_TOP_P,
            stop: vec![DEFAULT_STOP.to_string()],
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: None,
            kind: RequestKind::Act,
            key: None,
        }
    }

    /// Caps `max_tokens` at the model's maximum length.
    pub fn with_max_model_len(mut self, max_model_len: Option<u32>) -> Self {
        if let Some(n) = max_model_len {
            self.max_tokens = self.max_tokens.min(n);
        }
        self
    }

    pub fn with_key(mut self, episode: impl Into<String>, step: usize) -> Self {
        self.key = Some(RequestKey { episode: episode.into(), step });
        self
    }

    pub fn with_kind(mut self, kind: RequestKind) -> Self {
        self.kind = kind;
        self
    }
}

/// Sampling settings copied into every request of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RequestTemplate {
    pub temperature: f64,
    pub top_p: f64,
    pub stop: Vec<String>,
    pub max_tokens: u32,
    pub max_model_len: Option<u32>,
    pub seed: Option<u64>,
}

impl Default for RequestTemplate {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            top_p: DEFAULT_TOP_P,
            stop: vec![DEFAULT_STOP.to_string()],
            max_tokens: DEFAULT_MAX_TOKENS,
            max_model_len: None,
            seed: None,
        }
    }
}

impl RequestTemplate {
    pub fn build(&self, prompt: String) -> CompletionRequest {
        CompletionRequest {
            prompt,
            temperature: self.temperature,
            top_p: self.top_p,
            stop: self.stop.clone(),
            max_tokens: self.max_tokens,
            seed: self.seed,
            kind: RequestKind::Act,
            key: None,
        }
        .with_max_model_len(self.max_model_len)
    }
}

/// Cuts `text` at the earliest occurrence of any non-empty stop sequence.
pub fn apply_stop<'a>(text: &'a str, stops: &[String]) -> &'a str {
    let cut = stops.iter().filter(|s| !s.is_empty()).filter_map(|s| text.find(s.as_str())).min();
    match cut {
        Some(i) => &text[..i],
        None => text,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response body: {0}")]
    MalformedBody(String),
    #[error("no stored completion for {0}")]
    ReplayMiss(String),
    #[error("backend exhausted: {0}")]
    Exhausted(String),
    #[error("prompt cannot be sent: {0}")]
    Prompt(String),
}

/// A source of completions. One call per agent step.
pub trait ModelBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

impl<B: ModelBackend + ?Sized> ModelBackend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: ModelBackend + ?Sized> ModelBackend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Returns canned completions in order, then errors.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    replies: Vec<String>,
    next: Cell<usize>,
    prompts: RefCell<Vec<String>>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self { replies: replies.into_iter().map(Into::into).collect(), ..Self::default() }
    }

    pub fn calls(&self) -> usize {
        self.next.get()
    }

    /// Prompts received so far, in order.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.borrow().clone()
    }
}

impl ModelBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let i = self.next.get();
        self.next.set(i + 1);
        self.prompts.borrow_mut().push(request.prompt.clone());
        self.replies.get(i).cloned().ok_or_else(|| BackendError::Exhausted(format!("no reply #{i}")))
    }
}

/// Wraps a closure; useful for tests that react to the request.
pub struct FnBackend<F>(pub F);

impl<F: Fn(&CompletionRequest) -> Result<String, BackendError>> ModelBackend for FnBackend<F> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (self.0)(request)
    }
}

/// Answers with the scripted solver's next move, written as the variant's
/// context block with state taken from the environment's ground truth.
pub struct OracleBackend<E> {
    env: SharedEnv<E>,
    variant: AgentVariant,
    calls: Cell<usize>,
}

impl<E: Environment> OracleBackend<E> {
    pub fn new(env: SharedEnv<E>, variant: AgentVariant) -> Self {
        Self { env, variant, calls: Cell::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }

    /// The block the oracle would emit now, or `None` once the focus is met.
    pub fn next_context(&self) -> Option<AgentContext> {
        self.env.with(|env| {
            let action = env.oracle_action()?;
            let goal = extract_goal(&env.initial_observation()).ok();
            let state = env.ground_truth().project(&self.variant.state_keys());
            Some(AgentContext { goal, state: Some(state), thought: None, action }.project(&self.variant))
        })
    }
}

impl<E: Environment> ModelBackend for OracleBackend<E> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        self.calls.set(self.calls.get() + 1);
        match request.kind {
            RequestKind::Plan => {
                let subtasks = self.env.with(|e| e.oracle_decomposition());
                let lines: Vec<String> = subtasks.iter().enumerate().map(|(i, s)| format!("{}. {s}", i + 1)).collect();
                Ok(lines.join("\n"))
            }
            RequestKind::Act => self
                .next_context()
                .map(|ctx| serialize_context(&ctx, &self.variant))
                .ok_or_else(|| BackendError::Exhausted("oracle has no further action".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_greedy_with_blank_line_stop() {
        let r = CompletionRequest::new("p");
        assert_eq!(r.temperature, 0.0);
        assert_eq!(r.top_p, 1.0);
        assert_eq!(r.stop, vec!["\n\n".to_string()]);
        assert_eq!(r.max_tokens, 2000);
        assert_eq!(r.clone().with_max_model_len(Some(512)).max_tokens, 512);
        assert_eq!(r.with_max_model_len(Some(16000)).max_tokens, 2000);
    }

    #[test]
    fn stop_cuts_at_earliest() {
        let stops = vec!["\n\n".to_string(), "END".to_string()];
        assert_eq!(apply_stop("a\nb\n\nc", &stops), "a\nb");
        assert_eq!(apply_stop("aEND\n\n", &stops), "a");
        assert_eq!(apply_stop("plain", &stops), "plain");
        assert_eq!(apply_stop("x", &[String::new()]), "x");
    }

    #[test]
    fn scripted_counts_calls() {
        let b = ScriptedBackend::new(["one"]);
        let r = CompletionRequest::new("p");
        assert_eq!(b.complete(&r).unwrap(), "one");
        assert!(b.complete(&r).is_err());
        assert_eq!(b.calls(), 2);
    }
}
