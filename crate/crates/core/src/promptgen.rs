//! Candidate instruction prompts: generate, verify, refine, tune on
//! validation, and select an ensemble.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::LazyLock;
use thiserror::Error;
use tracing::{debug, info, warn};

use crate::backend::{ChatMessage, GenerationRequest};
use crate::corpus::{EntityType, Sentence};
use crate::dataset::{EntityDataset, Subset};
use crate::ensemble::{answer_line, run_sentences, EnsembleError, EnsembleMember, Inference, PromptEnsemble};
use crate::evalkit::{auxiliary_accuracies, match_entities, EntityCounts, Prf, SentenceOutcome};
use crate::scheduler::execute_with_retry;
use crate::text::{fold, stable_hash};

pub const PROMPT_START: &str = "<<<PROMPT>>>";
pub const PROMPT_END: &str = "<<<END PROMPT>>>";
pub const MIN_PROMPT_CHARS: usize = 200;
pub const MAX_PROMPT_CHARS: usize = 6000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub use_desc: bool,
    pub use_ex: bool,
    pub use_err: bool,
    pub n_candidates: u32,
    pub max_rounds: u32,
    pub val_f1_threshold: f64,
    pub select_threshold: f64,
    pub select_top_k: usize,
    /// Positive examples shown in the meta-prompt when `use_ex` is set.
    pub n_examples: usize,
    /// Incorrect validation sentences fed back when `use_err` is set.
    pub max_error_examples: usize,
    pub match_threshold: f64,
    pub generation_max_tokens: usize,
    pub seed: u64,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            use_desc: true,
            use_ex: true,
            use_err: true,
            n_candidates: 20,
            max_rounds: 5,
            val_f1_threshold: 0.8,
            select_threshold: 0.9,
            select_top_k: 3,
            n_examples: 3,
            max_error_examples: 10,
            match_threshold: 80.0,
            generation_max_tokens: 1024,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum PromptGenError {
    #[error("invalid prompt config: {0}")]
    Config(String),
    #[error("no candidate prompt for {0} passed verification")]
    NoViableCandidate(String),
    #[error(transparent)]
    Inference(#[from] EnsembleError),
}

impl PromptConfig {
    pub fn validate(&self) -> Result<(), PromptGenError> {
        let frac = |v: f64| v > 0.0 && v <= 1.0;
        if !frac(self.val_f1_threshold) || !frac(self.select_threshold) {
            return Err(PromptGenError::Config("thresholds must be in (0, 1]".into()));
        }
        if self.n_candidates == 0 || self.max_rounds == 0 || self.select_top_k == 0 {
            return Err(PromptGenError::Config("n_candidates, max_rounds and select_top_k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Criterion {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    C9,
}

impl Criterion {
    pub const ALL: [Criterion; 9] = [
        Criterion::C1,
        Criterion::C2,
        Criterion::C3,
        Criterion::C4,
        Criterion::C5,
        Criterion::C6,
        Criterion::C7,
        Criterion::C8,
        Criterion::C9,
    ];

    pub fn describe(self) -> &'static str {
        match self {
            Criterion::C1 => "names the target entity",
            Criterion::C2 => "states that the task is to extract mentions",
            Criterion::C3 => "requires a final answer line starting with the ANSWER sentinel",
            Criterion::C4 => "says to answer NONE when there is no mention",
            Criterion::C5 => "defines the entity",
            Criterion::C6 => "requires copying spans verbatim from the sentence",
            Criterion::C7 => "has no unresolved placeholders or truncation",
            Criterion::C8 => "is between 200 and 6000 characters long",
            Criterion::C9 => "does not ask for invented or fabricated examples",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

static C2_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bextract").unwrap());
static C4_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bNONE\b").unwrap());
static C5_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(defin(ed|ition|es)|refers? to|means|describes?|consists? of)\b").unwrap());
static C6_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(verbatim|word[- ]for[- ]word|exactly as (it |they )?(is |are )?(written|appears?|stated)|exact (text|wording|span|spelling))",
    )
    .unwrap()
});
static C7_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(\[INSERT[^\]]*\]|\[[A-Z][A-Z _]{2,}\]|\{\{[^}]*\}\}|\{[a-z_][a-z0-9_]*\}|<<<|>>>)").unwrap()
});
static C9_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(invent|fabricate|make up|create|generate|imagine|hallucinate)\s+([\w'-]+\s+){0,3}(examples?|sentences?|mentions?|cases?|entities|values?|spans?)\b",
    )
    .unwrap()
});
static NEGATION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(not|never|no|avoid|without|nor)\b|n't\b").unwrap());

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub passed: bool,
    pub violations: Vec<Criterion>,
}

/// Checks an instruction against criteria C1 to C9.
pub fn verify_prompt(text: &str, entity: &str) -> Verification {
    let mut v = Vec::new();
    if fold(entity).is_empty() || !fold(text).contains(&fold(entity)) {
        v.push(Criterion::C1);
    }
    if !C2_RE.is_match(text) {
        v.push(Criterion::C2);
    }
    if !text.contains("ANSWER:") {
        v.push(Criterion::C3);
    }
    if !C4_RE.is_match(text) {
        v.push(Criterion::C4);
    }
    if !C5_RE.is_match(text) {
        v.push(Criterion::C5);
    }
    if !C6_RE.is_match(text) {
        v.push(Criterion::C6);
    }
    let trimmed = text.trim_end();
    if C7_RE.is_match(text) || trimmed.ends_with("...") || trimmed.ends_with('\u{2026}') {
        v.push(Criterion::C7);
    }
    let n = text.chars().count();
    if !(MIN_PROMPT_CHARS..=MAX_PROMPT_CHARS).contains(&n) {
        v.push(Criterion::C8);
    }
    let asks_to_fabricate = C9_RE.find_iter(text).any(|m| {
        // Only the clause leading up to the verb can negate it.
        let before = &text[..m.start()];
        let clause_start = before.rfind(['.', ';', '\n', '!', '?']).map_or(0, |i| i + 1);
        !NEGATION_RE.is_match(&before[clause_start..])
    });
    if asks_to_fabricate {
        v.push(Criterion::C9);
    }
    Verification { passed: v.is_empty(), violations: v }
}

/// Text between the prompt sentinels; the whole reply when they are absent.
pub fn extract_generated_prompt(reply: &str) -> String {
    let body = match reply.rfind(PROMPT_START) {
        Some(i) => {
            let rest = &reply[i + PROMPT_START.len()..];
            rest.find(PROMPT_END).map_or(rest, |j| &rest[..j])
        }
        None => reply,
    };
    body.trim().to_string()
}

/// An incorrect sentence shown to the model in the next round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorExample {
    pub sentence: String,
    pub expected: String,
    pub produced: String,
}

fn candidate_rng(cfg: &PromptConfig, entity: &str, candidate_id: u32) -> ChaCha8Rng {
    let seed = cfg.seed ^ stable_hash(entity) ^ (u64::from(candidate_id)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    ChaCha8Rng::seed_from_u64(seed)
}

/// Training positives shown to candidate `candidate_id`, in dataset order.
pub fn sample_examples<'a>(dataset: &'a EntityDataset, cfg: &PromptConfig, candidate_id: u32) -> Vec<&'a Sentence> {
    let n = dataset.train_pos.len();
    let k = cfg.n_examples.min(n);
    let mut rng = candidate_rng(cfg, &dataset.entity, candidate_id);
    let mut idx = sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| &dataset.train_pos[i]).collect()
}

/// Builds the request text that asks the model for one instruction prompt.
pub fn compose_meta_prompt(
    entity: &EntityType,
    dataset: &EntityDataset,
    cfg: &PromptConfig,
    candidate_id: u32,
    round: u32,
    feedback: &[ErrorExample],
) -> String {
    let mut out = format!(
        "Task: generate prompt\nTarget entity: {}\nCandidate: {candidate_id}\nRound: {round}\n\n\
         Write an instruction prompt that makes a language model extract every mention of the entity \
         \"{}\" from one sentence of a dental clinical note.\n",
        entity.name, entity.name
    );
    if cfg.use_desc {
        out.push_str(&format!("\nEntity description: {}\n", entity.description));
    }
    if cfg.use_ex {
        let examples = sample_examples(dataset, cfg, candidate_id);
        if !examples.is_empty() {
            out.push_str("\nExample sentences with their expected answers:\n");
            for s in examples {
                out.push_str(&format!("Sentence: {}\nExpected: {}\n", s.text, answer_line(dataset.golds_of(s))));
            }
        }
    }
    if !feedback.is_empty() {
        out.push_str("\nThe previous prompt made these mistakes on validation sentences:\n");
        for e in feedback {
            out.push_str(&format!("Sentence: {}\nExpected: {}\nProduced: {}\n", e.sentence, e.expected, e.produced));
        }
    }
    out.push_str("\nRequirements, all of which the prompt must meet:\n");
    for c in Criterion::ALL {
        out.push_str(&format!("- {c}: {}\n", c.describe()));
    }
    out.push_str(&format!("\nReturn only the prompt, between a line {PROMPT_START} and a line {PROMPT_END}."));
    out
}

fn generation_request(user: String, cfg: &PromptConfig) -> GenerationRequest {
    GenerationRequest::new(
        vec![
            ChatMessage::system("You write instruction prompts for clinical named entity recognition."),
            ChatMessage::user(user),
        ],
        cfg.generation_max_tokens,
    )
}

fn single_call(req: GenerationRequest, inf: &Inference<'_>, stage: &str) -> Result<String, String> {
    let out = execute_with_retry(std::slice::from_ref(&req), &inf.policy, inf.backend, inf.ledger, stage);
    match out.results.into_iter().next() {
        Some(Ok(r)) => Ok(r.text),
        Some(Err(e)) => Err(e.to_string()),
        None => Err("no response".into()),
    }
}

/// Asks the model to fix `violations`. Returns `text` unchanged on failure.
pub fn refine_prompt(
    text: &str,
    entity: &EntityType,
    violations: &[Criterion],
    inf: &Inference<'_>,
    cfg: &PromptConfig,
) -> String {
    assert!(!violations.is_empty(), "refine_prompt needs at least one violation");
    let mut user =
        format!("Task: refine prompt\nTarget entity: {}\n\nThe prompt below fails these requirements:\n", entity.name);
    for v in violations {
        user.push_str(&format!("- {v}: {}\n", v.describe()));
    }
    user.push_str(&format!(
        "\nRewrite it so it meets every requirement. Return only the rewritten prompt, between a line \
         {PROMPT_START} and a line {PROMPT_END}.\n\nCurrent prompt:\n{PROMPT_START}\n{text}\n{PROMPT_END}"
    ));
    match single_call(generation_request(user, cfg), inf, "refinement") {
        Ok(reply) => {
            let out = extract_generated_prompt(&reply);
            if out.is_empty() {
                text.to_string()
            } else {
                out
            }
        }
        Err(e) => {
            warn!(entity = %entity.name, error = %e, "refinement failed, keeping prompt");
            text.to_string()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptEvaluation {
    pub counts: EntityCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub negative_accuracy: f64,
    pub positive_accuracy: f64,
    /// Sentences with any false positive or false negative, in subset order.
    pub errors: Vec<ErrorExample>,
}

/// Runs the two-stage inference with `prompt` alone over one subset.
pub fn evaluate_prompt(
    prompt: &str,
    dataset: &EntityDataset,
    subset: Subset,
    inf: &Inference<'_>,
    match_threshold: f64,
) -> Result<PromptEvaluation, EnsembleError> {
    let (pos, neg) = dataset.subset(subset);
    let sentences: Vec<Sentence> = pos.iter().chain(neg).cloned().collect();
    let run = run_sentences(&sentences, &PromptEnsemble::single(&dataset.entity, prompt), inf)?;
    let mut counts = EntityCounts::default();
    let mut outcomes = Vec::with_capacity(sentences.len());
    let mut errors = Vec::new();
    for (i, s) in sentences.iter().enumerate() {
        let extracted = run.texts_for(&s.note_id, s.index).to_vec();
        let golds = dataset.golds_of(s).to_vec();
        let c = match_entities(&extracted, &golds, match_threshold);
        if c.fp > 0 || c.fn_ > 0 {
            errors.push(ErrorExample {
                sentence: s.text.clone(),
                expected: answer_line(&golds),
                produced: answer_line(&extracted),
            });
        }
        counts += c;
        outcomes.push(SentenceOutcome { positive: i < pos.len(), golds, extracted });
    }
    let m: Prf<f64> = Prf::from_counts(counts);
    let (negative_accuracy, positive_accuracy) = auxiliary_accuracies(&outcomes, match_threshold);
    Ok(PromptEvaluation {
        counts,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        negative_accuracy,
        positive_accuracy,
        errors,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    /// `generate` or `refine`.
    pub action: String,
    pub prompt: String,
    pub verification_passed: bool,
    pub violations: Vec<Criterion>,
    pub val_precision: Option<f64>,
    pub val_recall: Option<f64>,
    pub val_f1: Option<f64>,
    pub error_examples_fed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidatePrompt {
    pub entity: String,
    pub candidate_id: u32,
    /// The retained prompt; empty when no round passed verification.
    pub text: String,
    pub retained_round: Option<u32>,
    pub rounds: Vec<RoundRecord>,
    pub best_val_f1: f64,
    pub test_precision: Option<f64>,
    pub test_recall: Option<f64>,
    pub test_f1: Option<f64>,
    pub failed: bool,
}

/// Runs the generate/verify/refine/evaluate loop for one candidate.
pub fn optimize_candidate(
    entity: &EntityType,
    dataset: &EntityDataset,
    cfg: &PromptConfig,
    candidate_id: u32,
    inf: &Inference<'_>,
) -> Result<CandidatePrompt, EnsembleError> {
    let tuning = dataset.tuning_subset();
    let mut rounds = Vec::new();
    let mut current: Option<(String, Vec<Criterion>)> = None;
    let mut feedback: Vec<ErrorExample> = Vec::new();
    let mut best: Option<(u32, String, f64)> = None;

    for round in 1..=cfg.max_rounds {
        let (action, text, backend_error) = match current.take() {
            Some((text, violations)) => ("refine", refine_prompt(&text, entity, &violations, inf, cfg), None),
            None => {
                let meta = compose_meta_prompt(entity, dataset, cfg, candidate_id, round, &feedback);
                match single_call(generation_request(meta, cfg), inf, "generation") {
                    Ok(reply) => ("generate", extract_generated_prompt(&reply), None),
                    Err(e) => ("generate", String::new(), Some(e)),
                }
            }
        };
        let ver = verify_prompt(&text, &entity.name);
        let mut rec = RoundRecord {
            round,
            action: action.into(),
            prompt: text.clone(),
            verification_passed: ver.passed,
            violations: ver.violations.clone(),
            val_precision: None,
            val_recall: None,
            val_f1: None,
            error_examples_fed: feedback.len(),
            backend_error,
        };
        if !ver.passed {
            debug!(entity = %entity.name, candidate_id, round, violations = ?ver.violations, "verification failed");
            if rec.backend_error.is_none() {
                current = Some((text, ver.violations));
            }
            rounds.push(rec);
            continue;
        }
        let eval = evaluate_prompt(&text, dataset, tuning, inf, cfg.match_threshold)?;
        rec.val_precision = Some(eval.precision);
        rec.val_recall = Some(eval.recall);
        rec.val_f1 = Some(eval.f1);
        rounds.push(rec);
        if best.as_ref().is_none_or(|(_, _, f)| eval.f1 > *f) {
            best = Some((round, text, eval.f1));
        }
        if eval.f1 >= cfg.val_f1_threshold {
            break;
        }
        feedback =
            if cfg.use_err { eval.errors.into_iter().take(cfg.max_error_examples).collect() } else { Vec::new() };
    }

    let Some((round, text, best_f1)) = best else {
        warn!(entity = %entity.name, candidate_id, "no round passed verification");
        return Ok(CandidatePrompt {
            entity: entity.name.clone(),
            candidate_id,
            text: String::new(),
            retained_round: None,
            rounds,
            best_val_f1: 0.0,
            test_precision: None,
            test_recall: None,
            test_f1: None,
            failed: true,
        });
    };
    let test = evaluate_prompt(&text, dataset, Subset::Test, inf, cfg.match_threshold)?;
    Ok(CandidatePrompt {
        entity: entity.name.clone(),
        candidate_id,
        text,
        retained_round: Some(round),
        rounds,
        best_val_f1: best_f1,
        test_precision: Some(test.precision),
        test_recall: Some(test.recall),
        test_f1: Some(test.f1),
        failed: false,
    })
}

/// Optimizes candidates `1..=n_candidates` concurrently; output is ordered by
/// candidate id.
pub fn generate_candidates(
    entity: &EntityType,
    dataset: &EntityDataset,
    cfg: &PromptConfig,
    inf: &Inference<'_>,
) -> Result<Vec<CandidatePrompt>, EnsembleError> {
    info!(entity = %entity.name, n = cfg.n_candidates, "optimizing candidates");
    (1..=cfg.n_candidates).into_par_iter().map(|id| optimize_candidate(entity, dataset, cfg, id, inf)).collect()
}

/// Picks the ensemble by test F1: the top `select_top_k` of those strictly
/// above `select_threshold`, or the top `select_top_k` overall when none
/// are. Ties go to the lower candidate id.
pub fn select_ensemble(candidates: &[CandidatePrompt], cfg: &PromptConfig) -> Result<PromptEnsemble, PromptGenError> {
    let mut ranked: Vec<(&CandidatePrompt, f64)> =
        candidates.iter().filter(|c| !c.failed).filter_map(|c| c.test_f1.map(|f| (c, f))).collect();
    let entity = candidates.first().map(|c| c.entity.clone()).unwrap_or_default();
    if ranked.is_empty() {
        return Err(PromptGenError::NoViableCandidate(entity));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.candidate_id.cmp(&b.0.candidate_id)));
    let above = ranked.iter().filter(|(_, f)| *f > cfg.select_threshold).count();
    let take = if above > 0 { above.min(cfg.select_top_k) } else { ranked.len().min(cfg.select_top_k) };
    Ok(PromptEnsemble {
        entity,
        prompts: ranked[..take]
            .iter()
            .map(|(c, f)| EnsembleMember { candidate_id: c.candidate_id, text: c.text.clone(), f1: *f })
            .collect(),
    })
}
