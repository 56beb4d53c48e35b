use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{
    BackendConfig, BackendError, ByteHeuristic, ChatMessage, GenerationBackend, GenerationRequest, GenerationResponse,
    TokenEstimator,
};

/// Client for an OpenAI-compatible `chat/completions` endpoint.
///
/// Greedy decoding is sent as `temperature: 0` with a single choice.
pub struct RemoteBackend {
    config: BackendConfig,
    agent: ureq::Agent,
    overflow: Vec<Regex>,
}

#[derive(Serialize)]
struct ChatBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    max_tokens: usize,
    temperature: f64,
    n: u32,
    stream: bool,
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl RemoteBackend {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let overflow = config
            .overflow_patterns
            .iter()
            .map(|p| Regex::new(p).map_err(|e| BackendError::Config(format!("overflow pattern {p:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.request_timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, agent, overflow })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Maps a failed HTTP exchange to an error class.
    pub fn classify(&self, status: u16, body: &str) -> BackendError {
        if self.config.overflow_statuses.contains(&status) && self.overflow.iter().any(|r| r.is_match(body)) {
            BackendError::CapacityExceeded(format!("status {status}: {}", truncate(body, 200)))
        } else {
            BackendError::Status { status, body: truncate(body, 500) }
        }
    }

    fn post(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
        let body = ChatBody {
            model: request.model.as_deref().unwrap_or(&self.config.model_name),
            messages: &request.messages,
            max_tokens: request.max_new_tokens,
            temperature: 0.0,
            n: 1,
            stream: false,
        };
        let mut call = self.agent.post(&self.config.endpoint_url);
        if let Some(key) = &self.config.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call.send_json(&body).map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(self.classify(status, &text));
        }
        let reply: ChatReply = serde_json::from_str(&text).map_err(|e| BackendError::InvalidResponse(e.to_string()))?;
        let content = reply
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::InvalidResponse("no choices".into()))?
            .message
            .content
            .unwrap_or_default();
        let (prompt_tokens, completion_tokens) = match reply.usage {
            Some(u) => (u.prompt_tokens, u.completion_tokens),
            None => (request.estimated_tokens(&ByteHeuristic) as u64, ByteHeuristic.count(&content) as u64),
        };
        Ok(GenerationResponse { text: content, prompt_tokens, completion_tokens })
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

impl GenerationBackend for RemoteBackend {
    fn context_window(&self) -> usize {
        self.config.context_window
    }

    fn complete(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
        request.validate()?;
        request.check_window(&ByteHeuristic, self.config.context_window)?;
        self.post(request)
    }

    /// Dispatches the batch with at most `max_concurrent_requests` in flight.
    fn complete_batch(&self, requests: &[GenerationRequest]) -> Vec<Result<GenerationResponse, BackendError>> {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<GenerationResponse, BackendError>>>> =
            requests.iter().map(|_| Mutex::new(None)).collect();
        let workers = self.config.max_concurrent_requests.min(requests.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= requests.len() {
                        break;
                    }
                    let r = self.complete(&requests[i]);
                    *slots[i].lock().expect("slot lock") = Some(r);
                });
            }
        });
        slots.into_iter().map(|s| s.into_inner().expect("slot lock").expect("every slot filled")).collect()
    }
}
