//! Token-aware batching, capacity retry and token accounting.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Mutex;
use thiserror::Error;
use tracing::{debug, warn};

use crate::backend::{BackendError, ByteHeuristic, GenerationBackend, GenerationRequest, GenerationResponse};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub input_ratio: f64,
    pub reduction_factor: f64,
    pub min_ratio: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { input_ratio: 0.8, reduction_factor: 0.5, min_ratio: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invalid retry policy: {0}")]
pub struct PolicyError(pub String);

impl RetryPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.min_ratio > 0.0 && self.min_ratio <= self.input_ratio && self.input_ratio <= 1.0) {
            return Err(PolicyError(format!(
                "need 0 < min_ratio <= input_ratio <= 1, got min_ratio={} input_ratio={}",
                self.min_ratio, self.input_ratio
            )));
        }
        if !(self.reduction_factor > 0.0 && self.reduction_factor < 1.0) {
            return Err(PolicyError(format!("reduction_factor must be in (0, 1), got {}", self.reduction_factor)));
        }
        Ok(())
    }

    /// The next ratio after a capacity failure at `ratio`, or `None` once the
    /// floor has been used.
    pub fn reduce(&self, ratio: f64) -> Option<f64> {
        if ratio <= self.min_ratio {
            None
        } else {
            Some((ratio * self.reduction_factor).max(self.min_ratio))
        }
    }
}

/// `floor(context_window * ratio)`.
pub fn budget_for(context_window: usize, ratio: f64) -> usize {
    // The epsilon keeps e.g. 100 * 0.29 from flooring to 28.
    (context_window as f64 * ratio + 1e-9).floor().max(0.0) as usize
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedBatch<I> {
    pub items: Vec<I>,
    pub estimate: usize,
    /// A single item whose estimate alone exceeds the budget.
    pub oversize: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan<I> {
    pub budget: usize,
    pub batches: Vec<PlannedBatch<I>>,
}

/// Packs items into batches in input order, opening a new batch whenever the
/// next item would overflow the budget.
pub fn plan_batches<I: Clone>(items: &[(I, usize)], context_window: usize, ratio: f64) -> BatchPlan<I> {
    let budget = budget_for(context_window, ratio);
    let mut batches = Vec::new();
    let mut current: PlannedBatch<I> = PlannedBatch { items: Vec::new(), estimate: 0, oversize: false };
    for (id, est) in items {
        if *est > budget {
            if !current.items.is_empty() {
                batches.push(std::mem::replace(
                    &mut current,
                    PlannedBatch { items: Vec::new(), estimate: 0, oversize: false },
                ));
            }
            batches.push(PlannedBatch { items: vec![id.clone()], estimate: *est, oversize: true });
            continue;
        }
        if !current.items.is_empty() && current.estimate + est > budget {
            batches.push(std::mem::replace(
                &mut current,
                PlannedBatch { items: Vec::new(), estimate: 0, oversize: false },
            ));
        }
        current.items.push(id.clone());
        current.estimate += est;
    }
    if !current.items.is_empty() {
        batches.push(current);
    }
    BatchPlan { budget, batches }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageUsage {
    pub requests: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl StageUsage {
    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    fn add(&mut self, r: &GenerationResponse) {
        self.requests += 1;
        self.prompt_tokens += r.prompt_tokens;
        self.completion_tokens += r.completion_tokens;
    }
}

/// Serializable snapshot of a [`TokenLedger`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub requests: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
    pub stages: BTreeMap<String, StageUsage>,
}

impl LedgerReport {
    pub fn render_table(&self) -> String {
        let mut out =
            format!("{:<16} {:>9} {:>12} {:>12} {:>12}\n", "stage", "requests", "prompt", "completion", "total");
        let row = |name: &str, u: &StageUsage| {
            format!(
                "{:<16} {:>9} {:>12} {:>12} {:>12}\n",
                name,
                u.requests,
                u.prompt_tokens,
                u.completion_tokens,
                u.total_tokens()
            )
        };
        for (name, u) in &self.stages {
            out.push_str(&row(name, u));
        }
        let total = StageUsage {
            requests: self.requests,
            prompt_tokens: self.prompt_tokens,
            completion_tokens: self.completion_tokens,
        };
        out.push_str(&row("total", &total));
        out
    }

    /// Sums several reports, e.g. one per pipeline command.
    pub fn merge<'a, I: IntoIterator<Item = &'a LedgerReport>>(reports: I) -> LedgerReport {
        let mut out = LedgerReport::default();
        for r in reports {
            for (stage, u) in &r.stages {
                let e = out.stages.entry(stage.clone()).or_default();
                e.requests += u.requests;
                e.prompt_tokens += u.prompt_tokens;
                e.completion_tokens += u.completion_tokens;
            }
            out.requests += r.requests;
            out.prompt_tokens += r.prompt_tokens;
            out.completion_tokens += r.completion_tokens;
        }
        out.total_tokens = out.prompt_tokens + out.completion_tokens;
        out
    }
}

/// Global token accounting. Safe to share across threads; every update is
/// applied under one lock so totals and stage counters never disagree.
#[derive(Debug, Default)]
pub struct TokenLedger {
    inner: Mutex<LedgerReport>,
}

impl TokenLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, stage: &str, response: &GenerationResponse) {
        let mut g = self.inner.lock().expect("ledger lock");
        g.stages.entry(stage.to_string()).or_default().add(response);
        g.requests += 1;
        g.prompt_tokens += response.prompt_tokens;
        g.completion_tokens += response.completion_tokens;
        g.total_tokens = g.prompt_tokens + g.completion_tokens;
    }

    pub fn snapshot(&self) -> LedgerReport {
        self.inner.lock().expect("ledger lock").clone()
    }

    pub fn total_tokens(&self) -> u64 {
        self.inner.lock().expect("ledger lock").total_tokens
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispatchStatus {
    Ok,
    /// At least one member hit a capacity failure and was re-planned.
    CapacityRetry,
    /// Single-item dispatch after the ratio floor.
    FinalAttempt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchRecord {
    pub items: Vec<usize>,
    pub ratio: f64,
    pub budget: usize,
    pub estimate: usize,
    pub oversize: bool,
    pub status: DispatchStatus,
}

/// Result of [`execute_with_retry`]: exactly one entry per input request, in
/// input order.
#[derive(Debug)]
pub struct ExecutionOutcome {
    pub results: Vec<Result<GenerationResponse, BackendError>>,
    pub dispatches: Vec<DispatchRecord>,
}

impl ExecutionOutcome {
    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| r.is_err()).count()
    }
}

/// Runs `requests` through `backend` in token-aware batches.
///
/// Batches are planned at `policy.input_ratio`. Members of a batch that fail
/// with a capacity error are re-planned at the reduced ratio and retried,
/// down to `policy.min_ratio`; after that each remaining item gets one
/// single-item attempt. Other errors are terminal. Every successful response
/// is recorded in `ledger` under `stage`.
pub fn execute_with_retry<B: GenerationBackend + ?Sized>(
    requests: &[GenerationRequest],
    policy: &RetryPolicy,
    backend: &B,
    ledger: &TokenLedger,
    stage: &str,
) -> ExecutionOutcome {
    let mut run = Run {
        requests,
        policy,
        backend,
        ledger,
        stage,
        window: backend.context_window(),
        slots: requests.iter().map(|_| None).collect(),
        dispatches: Vec::new(),
    };
    let items: Vec<(usize, usize)> =
        requests.iter().enumerate().map(|(i, r)| (i, r.estimated_tokens(&ByteHeuristic))).collect();
    run.at_ratio(&items, policy.input_ratio);
    let results = run.slots.into_iter().map(|s| s.expect("every item resolved exactly once")).collect();
    ExecutionOutcome { results, dispatches: run.dispatches }
}

struct Run<'a, B: ?Sized> {
    requests: &'a [GenerationRequest],
    policy: &'a RetryPolicy,
    backend: &'a B,
    ledger: &'a TokenLedger,
    stage: &'a str,
    window: usize,
    slots: Vec<Option<Result<GenerationResponse, BackendError>>>,
    dispatches: Vec<DispatchRecord>,
}

impl<B: GenerationBackend + ?Sized> Run<'_, B> {
    fn settle(&mut self, id: usize, r: Result<GenerationResponse, BackendError>) {
        match &r {
            Ok(resp) => self.ledger.record(self.stage, resp),
            Err(e) => warn!(stage = self.stage, item = id, error = %e, "request failed"),
        }
        self.slots[id] = Some(r);
    }

    fn at_ratio(&mut self, items: &[(usize, usize)], ratio: f64) {
        let plan = plan_batches(items, self.window, ratio);
        for batch in plan.batches {
            let reqs: Vec<GenerationRequest> = batch.items.iter().map(|&i| self.requests[i].clone()).collect();
            let results = self.backend.complete_batch(&reqs);
            let mut retry = Vec::new();
            for (&id, r) in batch.items.iter().zip(results) {
                match r {
                    Err(e) if e.is_capacity() => retry.push((id, items_estimate(items, id))),
                    r => self.settle(id, r),
                }
            }
            self.dispatches.push(DispatchRecord {
                items: batch.items,
                ratio,
                budget: plan.budget,
                estimate: batch.estimate,
                oversize: batch.oversize,
                status: if retry.is_empty() { DispatchStatus::Ok } else { DispatchStatus::CapacityRetry },
            });
            if retry.is_empty() {
                continue;
            }
            match self.policy.reduce(ratio) {
                Some(next) => {
                    debug!(stage = self.stage, items = retry.len(), ratio, next, "capacity failure, re-planning");
                    self.at_ratio(&retry, next);
                }
                None => self.one_by_one(&retry),
            }
        }
    }

    fn one_by_one(&mut self, items: &[(usize, usize)]) {
        let budget = budget_for(self.window, self.policy.min_ratio);
        for &(id, est) in items {
            let r = self
                .backend
                .complete_batch(std::slice::from_ref(&self.requests[id]))
                .pop()
                .unwrap_or_else(|| Err(BackendError::InvalidResponse("empty batch result".into())));
            self.dispatches.push(DispatchRecord {
                items: vec![id],
                ratio: self.policy.min_ratio,
                budget,
                estimate: est,
                oversize: est > budget,
                status: DispatchStatus::FinalAttempt,
            });
            self.settle(id, r);
        }
    }
}

fn items_estimate(items: &[(usize, usize)], id: usize) -> usize {
    items.iter().find(|(i, _)| *i == id).map_or(0, |(_, e)| *e)
}
