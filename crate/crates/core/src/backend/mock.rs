use regex::Regex;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{BackendError, ByteHeuristic, GenerationBackend, GenerationRequest, GenerationResponse, TokenEstimator};

/// One line of a mock rule table.
///
/// Every present matcher must match: `system` against the first system
/// message, `user` against the last user message, `model` against the
/// request's model override (or the backend's model name). The first matching
/// rule answers. When `user` is present its capture groups can be referenced
/// in `response` as `$1`, `${name}`; write `$$` for a literal dollar sign.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub response: String,
}

impl MockRule {
    pub fn user(pattern: &str, response: &str) -> Self {
        Self { system: None, user: Some(pattern.into()), model: None, response: response.into() }
    }

    pub fn any(response: &str) -> Self {
        Self { system: None, user: None, model: None, response: response.into() }
    }

    pub fn with_system(mut self, pattern: &str) -> Self {
        self.system = Some(pattern.into());
        self
    }

    pub fn with_model(mut self, pattern: &str) -> Self {
        self.model = Some(pattern.into());
        self
    }
}

struct CompiledRule {
    system: Option<Regex>,
    user: Option<Regex>,
    model: Option<Regex>,
    response: String,
}

/// Scripted batch failures, used to exercise capacity retries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FailurePolicy {
    #[default]
    Never,
    /// Any batch with more than this many requests fails.
    BatchesLargerThan(usize),
    /// The first `n` batch dispatches fail.
    FirstBatches(usize),
    Always,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub request: GenerationRequest,
    pub response: String,
}

/// Deterministic rule-table backend. Its answers are a pure function of the
/// rule table and the request; failure injection depends only on batch size
/// and dispatch order.
pub struct ScriptedBackend {
    rules: Vec<CompiledRule>,
    model_name: String,
    context_window: usize,
    failure: FailurePolicy,
    batch_calls: AtomicUsize,
    transcript: Mutex<Vec<TranscriptEntry>>,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<MockRule>) -> Result<Self, BackendError> {
        let compile = |p: &Option<String>| -> Result<Option<Regex>, BackendError> {
            p.as_deref()
                .map(|p| Regex::new(p).map_err(|e| BackendError::Config(format!("bad mock pattern {p:?}: {e}"))))
                .transpose()
        };
        let rules = rules
            .iter()
            .map(|r| {
                Ok(CompiledRule {
                    system: compile(&r.system)?,
                    user: compile(&r.user)?,
                    model: compile(&r.model)?,
                    response: r.response.clone(),
                })
            })
            .collect::<Result<Vec<_>, BackendError>>()?;
        Ok(Self {
            rules,
            model_name: "mock".into(),
            context_window: 8192,
            failure: FailurePolicy::Never,
            batch_calls: AtomicUsize::new(0),
            transcript: Mutex::new(Vec::new()),
        })
    }

    /// Reads a line-delimited rule table. Blank lines and lines starting with
    /// `#` or `//` are skipped.
    pub fn from_jsonl(path: &Path) -> Result<Self, BackendError> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut rules = Vec::new();
        for (i, line) in content.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with("//") {
                continue;
            }
            let rule: MockRule = serde_json::from_str(t)
                .map_err(|e| BackendError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
            rules.push(rule);
        }
        Self::new(rules)
    }

    pub fn with_context_window(mut self, window: usize) -> Self {
        self.context_window = window;
        self
    }

    pub fn with_model_name(mut self, name: impl Into<String>) -> Self {
        self.model_name = name.into();
        self
    }

    pub fn with_failure(mut self, failure: FailurePolicy) -> Self {
        self.failure = failure;
        self
    }

    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        self.transcript.lock().expect("transcript lock").clone()
    }

    pub fn batch_dispatches(&self) -> usize {
        self.batch_calls.load(Ordering::SeqCst)
    }

    fn answer(&self, request: &GenerationRequest) -> Option<String> {
        let system = request.system_text();
        let user = request.last_user_text();
        let model = request.model.as_deref().unwrap_or(&self.model_name);
        for rule in &self.rules {
            if rule.system.as_ref().is_some_and(|r| !r.is_match(system)) {
                continue;
            }
            if rule.model.as_ref().is_some_and(|r| !r.is_match(model)) {
                continue;
            }
            match &rule.user {
                None => return Some(rule.response.clone()),
                Some(re) => {
                    if let Some(caps) = re.captures(user) {
                        let mut out = String::new();
                        caps.expand(&rule.response, &mut out);
                        return Some(out);
                    }
                }
            }
        }
        None
    }
}

impl GenerationBackend for ScriptedBackend {
    fn context_window(&self) -> usize {
        self.context_window
    }

    fn complete(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
        request.validate()?;
        request.check_window(&ByteHeuristic, self.context_window)?;
        let text = self.answer(request).ok_or(BackendError::Unscripted)?;
        let response = GenerationResponse {
            prompt_tokens: request.estimated_tokens(&ByteHeuristic) as u64,
            completion_tokens: ByteHeuristic.count(&text) as u64,
            text,
        };
        self.transcript
            .lock()
            .expect("transcript lock")
            .push(TranscriptEntry { request: request.clone(), response: response.text.clone() });
        Ok(response)
    }

    fn complete_batch(&self, requests: &[GenerationRequest]) -> Vec<Result<GenerationResponse, BackendError>> {
        let call = self.batch_calls.fetch_add(1, Ordering::SeqCst);
        let fail = match self.failure {
            FailurePolicy::Never => false,
            FailurePolicy::BatchesLargerThan(n) => requests.len() > n,
            FailurePolicy::FirstBatches(n) => call < n,
            FailurePolicy::Always => true,
        };
        if fail {
            let msg = format!("scripted out of memory for batch of {}", requests.len());
            return requests.iter().map(|_| Err(BackendError::CapacityExceeded(msg.clone()))).collect();
        }
        requests.iter().map(|r| self.complete(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ChatMessage;

    fn req(system: &str, user: &str) -> GenerationRequest {
        GenerationRequest::new(vec![ChatMessage::system(system), ChatMessage::user(user)], 64)
    }

    #[test]
    fn first_matching_rule_answers() {
        let mock = ScriptedBackend::new(vec![
            MockRule::user("metformin", "ANSWER: [\"metformin\"]"),
            MockRule::user("(\\d+) y/o", "ANSWER: [\"$1 y/o\"]").with_system("Age"),
            MockRule::any("ANSWER: NONE"),
        ])
        .unwrap();
        let r = mock.complete(&req("x", "takes metformin")).unwrap();
        assert_eq!(r.text, "ANSWER: [\"metformin\"]");
        assert_eq!(r.prompt_tokens, 1 + 4);
        assert_eq!(r.completion_tokens, 6);
        assert_eq!(mock.complete(&req("Age", "pt is 56 y/o")).unwrap().text, "ANSWER: [\"56 y/o\"]");
        assert_eq!(mock.complete(&req("Sex", "pt is 56 y/o")).unwrap().text, "ANSWER: NONE");
    }

    #[test]
    fn model_matcher_and_unscripted() {
        let mock = ScriptedBackend::new(vec![MockRule::any("sft says hi").with_model("^sft$")]).unwrap();
        assert_eq!(mock.complete(&req("s", "u")), Err(BackendError::Unscripted));
        assert_eq!(mock.complete(&req("s", "u").with_model("sft")).unwrap().text, "sft says hi");
    }

    #[test]
    fn context_window_is_a_precondition() {
        let mock = ScriptedBackend::new(vec![MockRule::any("x")]).unwrap().with_context_window(4);
        let big = req("s", &"y".repeat(40));
        assert!(matches!(mock.complete(&big), Err(BackendError::ContextOverflow { .. })));
        assert!(mock.transcript().is_empty());
    }

    #[test]
    fn transcripts_are_reproducible() {
        let run = || {
            let mock = ScriptedBackend::new(vec![MockRule::user("(a+)", "got $1"), MockRule::any("none")]).unwrap();
            for u in ["aaa", "b", "xa"] {
                mock.complete(&req("s", u)).unwrap();
            }
            mock.transcript()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn failure_policies() {
        let mock =
            ScriptedBackend::new(vec![MockRule::any("ok")]).unwrap().with_failure(FailurePolicy::FirstBatches(1));
        let batch = vec![req("s", "u"), req("s", "v")];
        assert!(mock.complete_batch(&batch).iter().all(|r| r.as_ref().is_err_and(|e| e.is_capacity())));
        assert!(mock.complete_batch(&batch).iter().all(|r| r.is_ok()));
        let mock =
            ScriptedBackend::new(vec![MockRule::any("ok")]).unwrap().with_failure(FailurePolicy::BatchesLargerThan(1));
        assert!(mock.complete_batch(&batch).iter().all(|r| r.is_err()));
        assert!(mock.complete_batch(&batch[..1]).iter().all(|r| r.is_ok()));
    }
}
