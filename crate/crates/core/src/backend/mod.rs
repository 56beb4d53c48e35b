//! Generation backends: a chat-completions HTTP client and a scripted mock,
//! behind one blocking trait.

mod mock;
mod remote;

pub use mock::{FailurePolicy, MockRule, ScriptedBackend, TranscriptEntry};
pub use remote::RemoteBackend;

use serde::{Deserialize, Serialize};
use std::time::Duration;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub messages: Vec<ChatMessage>,
    pub max_new_tokens: usize,
    /// Greedy decoding. Every request issued by the pipeline sets this.
    pub deterministic: bool,
    /// Overrides the backend's configured model for this request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

impl GenerationRequest {
    pub fn new(messages: Vec<ChatMessage>, max_new_tokens: usize) -> Self {
        Self { messages, max_new_tokens, deterministic: true, model: None }
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = Some(model.into());
        self
    }

    pub fn system_text(&self) -> &str {
        self.messages.iter().find(|m| m.role == Role::System).map_or("", |m| m.content.as_str())
    }

    pub fn last_user_text(&self) -> &str {
        self.messages.iter().rev().find(|m| m.role == Role::User).map_or("", |m| m.content.as_str())
    }

    /// Estimated prompt size.
    pub fn estimated_tokens(&self, estimator: &dyn TokenEstimator) -> usize {
        self.messages.iter().map(|m| estimator.count(&m.content)).sum()
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("request has no messages".into()));
        }
        for m in &self.messages {
            if m.role != Role::Assistant && m.content.trim().is_empty() {
                return Err(BackendError::InvalidRequest(format!("empty {:?} message", m.role)));
            }
        }
        Ok(())
    }

    fn check_window(&self, estimator: &dyn TokenEstimator, window: usize) -> Result<(), BackendError> {
        let estimated = self.estimated_tokens(estimator);
        if estimated >= window {
            return Err(BackendError::ContextOverflow { estimated, window });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl GenerationResponse {
    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("server returned status {status}: {body}")]
    Status { status: u16, body: String },
    /// The server ran out of context or memory for this request or batch.
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),
    #[error("request needs ~{estimated} tokens but the context window is {window}")]
    ContextOverflow { estimated: usize, window: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("no scripted rule matches the request")]
    Unscripted,
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    pub fn is_capacity(&self) -> bool {
        matches!(self, BackendError::CapacityExceeded(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub context_window: usize,
    pub request_timeout: Duration,
    pub max_concurrent_requests: usize,
    /// Statuses that may signal memory or context exhaustion.
    pub overflow_statuses: Vec<u16>,
    /// Regexes over the error body; a match on an overflow status marks the
    /// failure as capacity-exceeded.
    pub overflow_patterns: Vec<String>,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model_name: "local-model".into(),
            context_window: 8192,
            request_timeout: Duration::from_secs(300),
            max_concurrent_requests: 8,
            overflow_statuses: vec![400, 413, 500, 503, 507],
            overflow_patterns: vec![
                "(?i)out of memory".into(),
                "(?i)\\boom\\b".into(),
                "(?i)context length".into(),
                "(?i)maximum context".into(),
                "(?i)too many tokens".into(),
            ],
            api_key: None,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.context_window == 0 {
            return Err(BackendError::Config("context_window must be positive".into()));
        }
        if self.max_concurrent_requests == 0 {
            return Err(BackendError::Config("max_concurrent_requests must be at least 1".into()));
        }
        Ok(())
    }
}

/// Pluggable token estimate.
pub trait TokenEstimator: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

/// `ceil(utf8_bytes / 4)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ByteHeuristic;

impl TokenEstimator for ByteHeuristic {
    fn count(&self, text: &str) -> usize {
        text.len().div_ceil(4)
    }
}

pub fn count_tokens(text: &str) -> usize {
    ByteHeuristic.count(text)
}

/// Blocking generation interface shared by the real client and the mock.
pub trait GenerationBackend: Send + Sync {
    fn context_window(&self) -> usize;

    fn complete(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError>;

    /// Runs one batch. A batch-level capacity failure is reported as
    /// [`BackendError::CapacityExceeded`] for every member.
    fn complete_batch(&self, requests: &[GenerationRequest]) -> Vec<Result<GenerationResponse, BackendError>> {
        requests.iter().map(|r| self.complete(r)).collect()
    }
}

impl<B: GenerationBackend + ?Sized> GenerationBackend for &B {
    fn context_window(&self) -> usize {
        (**self).context_window()
    }

    fn complete(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
        (**self).complete(request)
    }

    fn complete_batch(&self, requests: &[GenerationRequest]) -> Vec<Result<GenerationResponse, BackendError>> {
        (**self).complete_batch(requests)
    }
}

impl<B: GenerationBackend + ?Sized> GenerationBackend for Box<B> {
    fn context_window(&self) -> usize {
        (**self).context_window()
    }

    fn complete(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
        (**self).complete(request)
    }

    fn complete_batch(&self, requests: &[GenerationRequest]) -> Vec<Result<GenerationResponse, BackendError>> {
        (**self).complete_batch(requests)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_heuristic() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("abcd"), 1);
        assert_eq!(count_tokens("abcde"), 2);
    }

    #[test]
    fn request_validation() {
        let ok = GenerationRequest::new(vec![ChatMessage::system("s"), ChatMessage::user("u")], 8);
        assert!(ok.validate().is_ok());
        assert!(ok.deterministic);
        let bad = GenerationRequest::new(vec![ChatMessage::user("  ")], 8);
        assert!(matches!(bad.validate(), Err(BackendError::InvalidRequest(_))));
        assert!(GenerationRequest::new(vec![], 8).validate().is_err());
    }
}
