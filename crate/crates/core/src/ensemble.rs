//! Two-stage multi-prompt inference: Boolean screening by strict majority,
//! then extraction merged by union with first-seen order.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;
use tracing::warn;

use crate::backend::{ChatMessage, GenerationBackend, GenerationRequest};
use crate::corpus::{Note, Segmenter, Sentence};
use crate::scheduler::{execute_with_retry, RetryPolicy, TokenLedger};
use crate::text::dedup_key;

pub const ANSWER_SENTINEL: &str = "ANSWER:";
pub const NONE_TOKEN: &str = "NONE";

/// Model output split into free reasoning and the parsed final answer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoTOutput<T> {
    pub reasoning: String,
    pub answer: T,
    pub parse_ok: bool,
}

/// Payload of a line starting with the answer sentinel, tolerating markdown
/// emphasis and quoting around it.
fn sentinel_payload(line: &str) -> Option<&str> {
    let t = line.trim().trim_start_matches(['*', '#', '>', '-', ' ', '`']);
    let head = t.get(..ANSWER_SENTINEL.len())?;
    if !head.eq_ignore_ascii_case(ANSWER_SENTINEL) {
        return None;
    }
    let rest = &t[ANSWER_SENTINEL.len()..];
    Some(rest.trim_start_matches(['*', '`']).trim().trim_end_matches(['*', '`']).trim())
}

/// Finds the last sentinel line whose payload `parse` accepts.
fn last_answer<T>(text: &str, parse: impl Fn(&str) -> Option<T>) -> Option<(usize, T)> {
    let lines: Vec<&str> = text.lines().collect();
    lines.iter().enumerate().rev().find_map(|(i, l)| sentinel_payload(l).and_then(&parse).map(|v| (i, v)))
}

/// The last line carrying the answer sentinel, trimmed.
pub fn sentinel_line(text: &str) -> Option<&str> {
    text.lines().rev().find(|l| sentinel_payload(l).is_some()).map(str::trim)
}

fn reasoning_before(text: &str, line: usize) -> String {
    text.lines().take(line).collect::<Vec<_>>().join("\n").trim().to_string()
}

fn parse_yes_no(payload: &str) -> Option<bool> {
    let p = payload.trim_end_matches(['.', '!']).trim();
    if p.eq_ignore_ascii_case("yes") {
        Some(true)
    } else if p.eq_ignore_ascii_case("no") {
        Some(false)
    } else {
        None
    }
}

/// Reads the screening verdict. Without a well-formed answer line the result
/// is `false` with `parse_ok = false`.
pub fn parse_boolean(text: &str) -> CoTOutput<bool> {
    match last_answer(text, parse_yes_no) {
        Some((i, v)) => CoTOutput { reasoning: reasoning_before(text, i), answer: v, parse_ok: true },
        None => CoTOutput { reasoning: text.trim().to_string(), answer: false, parse_ok: false },
    }
}

/// Parses a bracketed list of quoted strings. Double quotes follow JSON
/// escaping; single and curly quotes are accepted without escapes.
pub fn parse_quoted_list(payload: &str) -> Option<Vec<String>> {
    let p = payload.trim().trim_end_matches('.').trim();
    if let Ok(v) = serde_json::from_str::<Vec<String>>(p) {
        return Some(v);
    }
    let mut chars = p.chars().peekable();
    if chars.next()? != '[' {
        return None;
    }
    let mut out = Vec::new();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        match chars.next()? {
            ']' if out.is_empty() => break,
            open @ ('"' | '\'' | '\u{201c}' | '\u{2018}') => {
                let close = match open {
                    '\u{201c}' => '\u{201d}',
                    '\u{2018}' => '\u{2019}',
                    c => c,
                };
                let mut item = String::new();
                loop {
                    let c = chars.next()?;
                    if c == '\\' && open == '"' {
                        item.push(chars.next()?);
                    } else if c == close {
                        break;
                    } else {
                        item.push(c);
                    }
                }
                out.push(item);
                while chars.peek().is_some_and(|c| c.is_whitespace()) {
                    chars.next();
                }
                match chars.next()? {
                    ',' => continue,
                    ']' => break,
                    _ => return None,
                }
            }
            _ => return None,
        }
    }
    if chars.any(|c| !c.is_whitespace()) {
        return None;
    }
    Some(out)
}

fn parse_list_payload(payload: &str) -> Option<Vec<String>> {
    let bare = payload.trim_end_matches('.').trim();
    if bare.eq_ignore_ascii_case(NONE_TOKEN) {
        return Some(Vec::new());
    }
    parse_quoted_list(payload).map(|v| v.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
}

/// Reads the extraction list. `NONE` yields an empty list; without a
/// well-formed answer line the result is empty with `parse_ok = false`.
pub fn parse_extraction(text: &str) -> CoTOutput<Vec<String>> {
    match last_answer(text, parse_list_payload) {
        Some((i, v)) => CoTOutput { reasoning: reasoning_before(text, i), answer: v, parse_ok: true },
        None => CoTOutput { reasoning: text.trim().to_string(), answer: Vec::new(), parse_ok: false },
    }
}

/// Canonical extraction answer line, e.g. `ANSWER: ["metformin", "aspirin"]`.
pub fn answer_line<S: AsRef<str>>(texts: &[S]) -> String {
    if texts.is_empty() {
        return format!("{ANSWER_SENTINEL} {NONE_TOKEN}");
    }
    let items: Vec<String> =
        texts.iter().map(|t| serde_json::to_string(t.as_ref()).expect("string serializes")).collect();
    format!("{ANSWER_SENTINEL} [{}]", items.join(", "))
}

pub fn boolean_line(v: bool) -> String {
    format!("{ANSWER_SENTINEL} {}", if v { "YES" } else { "NO" })
}

/// Union of per-prompt lists in order, dropping later duplicates under
/// [`dedup_key`] and keeping the first surface form.
pub fn merge_extractions<S: AsRef<str>>(lists: &[Vec<S>]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for t in lists.iter().flatten() {
        let key = dedup_key(t.as_ref());
        if !key.is_empty() && seen.insert(key) {
            out.push(t.as_ref().to_string());
        }
    }
    out
}

/// Strict majority: `positive > total / 2`.
pub fn majority(positive: usize, total: usize) -> bool {
    2 * positive > total
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub candidate_id: u32,
    pub text: String,
    /// Score the member was selected on.
    pub f1: f64,
}

/// Selected prompts for one entity, in rank order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptEnsemble {
    pub entity: String,
    pub prompts: Vec<EnsembleMember>,
}

impl PromptEnsemble {
    /// A one-prompt ensemble, used to evaluate a single candidate.
    pub fn single(entity: &str, text: &str) -> Self {
        Self {
            entity: entity.to_string(),
            prompts: vec![EnsembleMember { candidate_id: 0, text: text.to_string(), f1: 0.0 }],
        }
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vote {
    Yes,
    No,
    /// No well-formed answer line; counted as no.
    Unparsed,
    /// The request failed terminally; counted as no.
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub note_id: String,
    pub sentence_index: usize,
    pub votes: Vec<Vote>,
    pub votes_positive: usize,
    pub votes_total: usize,
    pub advanced: bool,
}

impl ScreeningResult {
    pub fn from_votes(sentence: &Sentence, votes: Vec<Vote>) -> Self {
        let votes_positive = votes.iter().filter(|v| **v == Vote::Yes).count();
        let votes_total = votes.len();
        Self {
            note_id: sentence.note_id.clone(),
            sentence_index: sentence.index,
            advanced: majority(votes_positive, votes_total),
            votes,
            votes_positive,
            votes_total,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub note_id: String,
    pub sentence_index: usize,
    pub entity: String,
    pub texts: Vec<String>,
}

/// One line of the predictions file.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Prediction {
    pub note_id: String,
    pub sentence_index: usize,
    pub entity: String,
    pub text: String,
}

pub fn predictions(extractions: &[Extraction]) -> Vec<Prediction> {
    extractions
        .iter()
        .flat_map(|e| {
            e.texts.iter().map(move |t| Prediction {
                note_id: e.note_id.clone(),
                sentence_index: e.sentence_index,
                entity: e.entity.clone(),
                text: t.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("ensemble for {0} has no prompts")]
    EmptyEnsemble(String),
    #[error("every {stage} request failed ({count} of {count}); last error: {last}")]
    Exhausted { stage: &'static str, count: usize, last: String },
}

/// Backend, retry policy and ledger shared by inference stages.
pub struct Inference<'a> {
    pub backend: &'a dyn GenerationBackend,
    pub policy: RetryPolicy,
    pub ledger: &'a TokenLedger,
    pub max_new_tokens: usize,
}

pub fn screening_request(prompt: &str, entity: &str, sentence: &str, max_new_tokens: usize) -> GenerationRequest {
    let user = format!(
        "Step: screening\nEntity: {entity}\nDecide whether the sentence below mentions at least one {entity}. \
         Reason briefly, then end with a final line `ANSWER: YES` or `ANSWER: NO`.\nSentence: {sentence}"
    );
    GenerationRequest::new(vec![ChatMessage::system(prompt), ChatMessage::user(user)], max_new_tokens)
}

pub fn extraction_request(prompt: &str, entity: &str, sentence: &str, max_new_tokens: usize) -> GenerationRequest {
    let user = format!(
        "Step: extraction\nEntity: {entity}\nCopy every {entity} mention from the sentence below exactly as written. \
         Reason briefly, then end with a final line `ANSWER: [\"mention\", ...]` or `ANSWER: NONE`.\nSentence: {sentence}"
    );
    GenerationRequest::new(vec![ChatMessage::system(prompt), ChatMessage::user(user)], max_new_tokens)
}

/// Queries in (sentence, prompt) order; returns per-query texts, `None` on
/// terminal failure.
fn run_stage(
    stage: &'static str,
    requests: Vec<GenerationRequest>,
    inf: &Inference<'_>,
) -> Result<Vec<Option<String>>, EnsembleError> {
    if requests.is_empty() {
        return Ok(Vec::new());
    }
    let out = execute_with_retry(&requests, &inf.policy, inf.backend, inf.ledger, stage);
    let count = out.results.len();
    let failed = out.failures();
    if failed == count {
        let last = out.results.iter().rev().find_map(|r| r.as_ref().err()).map(|e| e.to_string()).unwrap_or_default();
        return Err(EnsembleError::Exhausted { stage, count, last });
    }
    if failed > 0 {
        warn!(stage, failed, count, "some requests failed; treated as negative");
    }
    Ok(out.results.into_iter().map(|r| r.ok().map(|r| r.text)).collect())
}

/// Stage 1: one Boolean query per (prompt, sentence).
pub fn screen(
    sentences: &[Sentence],
    ensemble: &PromptEnsemble,
    inf: &Inference<'_>,
) -> Result<Vec<ScreeningResult>, EnsembleError> {
    if ensemble.is_empty() {
        return Err(EnsembleError::EmptyEnsemble(ensemble.entity.clone()));
    }
    let k = ensemble.len();
    let requests = sentences
        .iter()
        .flat_map(|s| {
            ensemble.prompts.iter().map(|p| screening_request(&p.text, &ensemble.entity, &s.text, inf.max_new_tokens))
        })
        .collect();
    let texts = run_stage("screening", requests, inf)?;
    Ok(sentences
        .iter()
        .zip(texts.chunks(k.max(1)))
        .map(|(s, chunk)| {
            let votes = chunk
                .iter()
                .map(|t| match t {
                    None => Vote::Failed,
                    Some(t) => {
                        let p = parse_boolean(t);
                        match (p.parse_ok, p.answer) {
                            (false, _) => {
                                warn!(note = %s.note_id, sentence = s.index, "unparseable screening answer");
                                Vote::Unparsed
                            }
                            (true, true) => Vote::Yes,
                            (true, false) => Vote::No,
                        }
                    }
                })
                .collect();
            ScreeningResult::from_votes(s, votes)
        })
        .collect())
}

/// Stage 2: every prompt extracts from every advanced sentence; lists are
/// merged per sentence in ensemble order.
pub fn extract(
    advanced: &[Sentence],
    ensemble: &PromptEnsemble,
    inf: &Inference<'_>,
) -> Result<Vec<Extraction>, EnsembleError> {
    if ensemble.is_empty() {
        return Err(EnsembleError::EmptyEnsemble(ensemble.entity.clone()));
    }
    let k = ensemble.len();
    let requests = advanced
        .iter()
        .flat_map(|s| {
            ensemble.prompts.iter().map(|p| extraction_request(&p.text, &ensemble.entity, &s.text, inf.max_new_tokens))
        })
        .collect();
    let texts = run_stage("extraction", requests, inf)?;
    Ok(advanced
        .iter()
        .zip(texts.chunks(k.max(1)))
        .map(|(s, chunk)| {
            let lists: Vec<Vec<String>> = chunk
                .iter()
                .map(|t| match t {
                    None => Vec::new(),
                    Some(t) => {
                        let p = parse_extraction(t);
                        if !p.parse_ok {
                            warn!(note = %s.note_id, sentence = s.index, "unparseable extraction answer");
                        }
                        p.answer
                    }
                })
                .collect();
            Extraction {
                note_id: s.note_id.clone(),
                sentence_index: s.index,
                entity: ensemble.entity.clone(),
                texts: merge_extractions(&lists),
            }
        })
        .collect())
}

/// Screening verdicts and extractions for one entity over a sentence list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRun {
    pub screening: Vec<ScreeningResult>,
    /// One entry per advanced sentence, in input order.
    pub extractions: Vec<Extraction>,
}

impl EntityRun {
    /// Final texts for a sentence; empty when it did not advance.
    pub fn texts_for(&self, note_id: &str, index: usize) -> &[String] {
        self.extractions
            .iter()
            .find(|e| e.note_id == note_id && e.sentence_index == index)
            .map_or(&[], |e| e.texts.as_slice())
    }
}

/// Screen then extract over already segmented sentences.
pub fn run_sentences(
    sentences: &[Sentence],
    ensemble: &PromptEnsemble,
    inf: &Inference<'_>,
) -> Result<EntityRun, EnsembleError> {
    if sentences.is_empty() {
        return Ok(EntityRun { screening: Vec::new(), extractions: Vec::new() });
    }
    let screening = screen(sentences, ensemble, inf)?;
    let advanced: Vec<Sentence> =
        sentences.iter().zip(&screening).filter(|(_, r)| r.advanced).map(|(s, _)| s.clone()).collect();
    let extractions = extract(&advanced, ensemble, inf)?;
    Ok(EntityRun { screening, extractions })
}

/// Segment, screen and extract one entity over notes. Output follows note
/// order, then sentence index.
pub fn run_entity(
    notes: &[Note],
    segmenter: &dyn Segmenter,
    ensemble: &PromptEnsemble,
    inf: &Inference<'_>,
) -> Result<EntityRun, EnsembleError> {
    let sentences: Vec<Sentence> = notes.iter().flat_map(|n| segmenter.segment(n)).collect();
    run_sentences(&sentences, ensemble, inf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{MockRule, ScriptedBackend};
    use crate::corpus::RuleSegmenter;
    use proptest::prelude::*;

    #[test]
    fn boolean_examples() {
        let p = parse_boolean("The sentence states an age.\nANSWER: YES");
        assert_eq!((p.answer, p.parse_ok), (true, true));
        assert_eq!(p.reasoning, "The sentence states an age.");
        assert!(!parse_boolean("...\nANSWER: NO").answer);
        let p = parse_boolean("maybe yes?");
        assert_eq!((p.answer, p.parse_ok), (false, false));
        assert!(parse_boolean("**Answer:** yes.").answer);
        // A later malformed sentinel does not hide an earlier valid one.
        assert!(parse_boolean("ANSWER: YES\nANSWER: probably").parse_ok);
    }

    #[test]
    fn extraction_examples() {
        let p = parse_extraction("ANSWER: [\"metformin\", \"aspirin\"]");
        assert_eq!(p.answer, vec!["metformin", "aspirin"]);
        assert!(p.parse_ok);
        let p = parse_extraction("ANSWER: NONE");
        assert!(p.answer.is_empty() && p.parse_ok);
        let p = parse_extraction("no sentinel here");
        assert!(p.answer.is_empty() && !p.parse_ok);
        assert_eq!(parse_extraction("ANSWER: ['stage III', \"grade B\"]").answer, vec!["stage III", "grade B"]);
        assert_eq!(parse_extraction("ANSWER: []").answer, Vec::<String>::new());
        assert!(!parse_extraction("ANSWER: [metformin]").parse_ok);
        assert!(!parse_extraction("ANSWER: [\"a\"] trailing").parse_ok);
    }

    #[test]
    fn answer_line_round_trips() {
        let texts = vec!["metformin".to_string(), "say \"hi\", ok".to_string()];
        let line = answer_line(&texts);
        assert_eq!(parse_extraction(&line).answer, texts);
        assert_eq!(answer_line::<&str>(&[]), "ANSWER: NONE");
        assert_eq!(answer_line(&["metformin", "aspirin"]), "ANSWER: [\"metformin\", \"aspirin\"]");
    }

    #[test]
    fn merge_examples() {
        let merged = merge_extractions(&[vec!["metformin"], vec!["Metformin", "aspirin"]]);
        assert_eq!(merged, vec!["metformin", "aspirin"]);
        assert!(merge_extractions::<&str>(&[vec![], vec![]]).is_empty());
    }

    #[test]
    fn majority_examples() {
        assert!(majority(2, 3));
        assert!(!majority(1, 2));
        assert!(majority(1, 1));
        assert!(!majority(0, 0));
    }

    fn ensemble(n: usize) -> PromptEnsemble {
        PromptEnsemble {
            entity: "Medication Taken".into(),
            prompts: (1..=n)
                .map(|i| EnsembleMember { candidate_id: i as u32, text: format!("prompt-{i}"), f1: 0.9 })
                .collect(),
        }
    }

    fn three_prompt_mock() -> ScriptedBackend {
        ScriptedBackend::new(vec![
            MockRule::user("(?s)^Step: screening.*Sentence: .*(metformin|aspirin|Aspirin)", "ANSWER: YES"),
            MockRule::user("(?s)^Step: screening", "ANSWER: NO"),
            MockRule::user("(?s)^Step: extraction.*Sentence: .*", "ANSWER: [\"metformin\"]").with_system("^prompt-1$"),
            MockRule::user("(?s)^Step: extraction", "thinking\nANSWER: ['Metformin', 'aspirin']")
                .with_system("^prompt-2$"),
            MockRule::user("(?s)^Step: extraction", "ANSWER: [\"aspirin.\", \"ibuprofen\"]").with_system("^prompt-3$"),
        ])
        .unwrap()
    }

    #[test]
    fn scripted_three_prompt_merge() {
        let backend = three_prompt_mock();
        let ledger = TokenLedger::new();
        let inf = Inference { backend: &backend, policy: RetryPolicy::default(), ledger: &ledger, max_new_tokens: 64 };
        let notes = vec![
            Note { note_id: "n1".into(), text: "Takes metformin and aspirin daily. No pain reported.".into() },
            Note { note_id: "n2".into(), text: "Brushes twice.".into() },
        ];
        let run = run_entity(&notes, &RuleSegmenter::default(), &ensemble(3), &inf).unwrap();
        assert_eq!(run.screening.len(), 3);
        assert_eq!(run.screening.iter().map(|r| r.advanced).collect::<Vec<_>>(), vec![true, false, false]);
        assert_eq!(
            run.extractions,
            vec![Extraction {
                note_id: "n1".into(),
                sentence_index: 0,
                entity: "Medication Taken".into(),
                texts: vec!["metformin".into(), "aspirin".into(), "ibuprofen".into()],
            }]
        );
        // Stage gating: 3 prompts x 1 advanced sentence.
        let stage2 =
            backend.transcript().iter().filter(|t| t.request.last_user_text().starts_with("Step: extraction")).count();
        assert_eq!(stage2, 3);
        assert_eq!(ledger.snapshot().stages["extraction"].requests, 3);
    }

    #[test]
    fn all_no_means_no_stage_two() {
        let backend = ScriptedBackend::new(vec![MockRule::any("ANSWER: NO")]).unwrap();
        let ledger = TokenLedger::new();
        let inf = Inference { backend: &backend, policy: RetryPolicy::default(), ledger: &ledger, max_new_tokens: 64 };
        let notes = vec![Note { note_id: "n".into(), text: "One. Two. Three.".into() }];
        let run = run_entity(&notes, &RuleSegmenter::default(), &ensemble(2), &inf).unwrap();
        assert!(run.extractions.is_empty());
        assert_eq!(backend.transcript().len(), 6);
        assert!(run_entity(&[], &RuleSegmenter::default(), &ensemble(2), &inf).unwrap().screening.is_empty());
    }

    #[test]
    fn failures_vote_no_and_total_failure_is_exhaustion() {
        let backend = ScriptedBackend::new(vec![MockRule::any("ANSWER: YES").with_system("^prompt-1$")]).unwrap();
        let ledger = TokenLedger::new();
        let inf = Inference { backend: &backend, policy: RetryPolicy::default(), ledger: &ledger, max_new_tokens: 64 };
        let s = RuleSegmenter::default().segment(&Note { note_id: "n".into(), text: "Takes metformin.".into() });
        let r = screen(&s, &ensemble(3), &inf).unwrap();
        assert_eq!(r[0].votes, vec![Vote::Yes, Vote::Failed, Vote::Failed]);
        assert!(!r[0].advanced);

        let dead = ScriptedBackend::new(vec![]).unwrap();
        let inf = Inference { backend: &dead, policy: RetryPolicy::default(), ledger: &ledger, max_new_tokens: 64 };
        assert!(matches!(screen(&s, &ensemble(1), &inf), Err(EnsembleError::Exhausted { .. })));
    }

    #[test]
    fn predictions_flatten_in_order() {
        let e = Extraction {
            note_id: "n".into(),
            sentence_index: 2,
            entity: "Age".into(),
            texts: vec!["a".into(), "b".into()],
        };
        let p = predictions(&[e]);
        assert_eq!(p.iter().map(|p| p.text.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
        assert_eq!(
            serde_json::to_string(&p[0]).unwrap(),
            r#"{"note_id":"n","sentence_index":2,"entity":"Age","text":"a"}"#
        );
    }

    proptest! {
        #[test]
        fn majority_is_monotone(k in 1usize..8, pos in 0usize..8) {
            let pos = pos.min(k);
            if majority(pos, k) && pos < k {
                prop_assert!(majority(pos + 1, k));
            }
        }

        #[test]
        fn merge_is_idempotent(lists in prop::collection::vec(prop::collection::vec("[a-cA-C ,.]{0,4}", 0..4), 0..4)) {
            let once = merge_extractions(&lists);
            prop_assert_eq!(merge_extractions(std::slice::from_ref(&once)), once.clone());
            let flat: Vec<&String> = lists.iter().flatten().collect();
            let mut pos = 0;
            for m in &once {
                let found = flat[pos..].iter().position(|f| *f == m);
                prop_assert!(found.is_some());
                pos += found.unwrap() + 1;
            }
        }

        #[test]
        fn answer_line_round_trip(texts in prop::collection::vec("[ -~]{1,12}", 0..5)) {
            let texts: Vec<String> = texts.into_iter().map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect();
            let parsed = parse_extraction(&answer_line(&texts));
            prop_assert!(parsed.parse_ok);
            prop_assert_eq!(parsed.answer, texts);
        }
    }
}
