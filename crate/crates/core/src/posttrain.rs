//! Supervised fine-tuning and preference-pair datasets.
//!
//! File shapes, one JSON object per line:
//! - SFT: `{"messages": [system, user, assistant], "entity", "polarity"}`
//! - DPO: `{"prompt": [system, user], "chosen", "rejected"}`

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use tracing::warn;

use crate::backend::{BackendError, ChatMessage, GenerationRequest, Role};
use crate::corpus::{Sentence, SentenceKey};
use crate::ensemble::{answer_line, parse_extraction, sentinel_line, Inference};
use crate::evalkit::{match_entities, MetricsReport};
use crate::scalar::Scalar;
use crate::scheduler::execute_with_retry;
use crate::text::stable_hash;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftExample {
    pub messages: Vec<ChatMessage>,
    pub entity: String,
    pub polarity: Polarity,
}

impl SftExample {
    pub fn new(system: &str, sentence: &str, golds: &[String], entity: &str) -> Self {
        Self {
            messages: vec![
                ChatMessage::system(system),
                ChatMessage::user(sentence),
                ChatMessage::assistant(answer_line(golds)),
            ],
            entity: entity.to_string(),
            polarity: if golds.is_empty() { Polarity::Negative } else { Polarity::Positive },
        }
    }

    fn content(&self, role: Role) -> &str {
        self.messages.iter().find(|m| m.role == role).map_or("", |m| m.content.as_str())
    }

    pub fn system(&self) -> &str {
        self.content(Role::System)
    }

    pub fn user(&self) -> &str {
        self.content(Role::User)
    }

    pub fn assistant(&self) -> &str {
        self.content(Role::Assistant)
    }

    /// The gold texts encoded in the assistant message.
    pub fn golds(&self) -> Vec<String> {
        parse_extraction(self.assistant()).answer
    }
}

/// Labeled sentences of one entity plus the instruction to train with.
#[derive(Clone, Debug)]
pub struct SftSource<'a> {
    pub entity: &'a str,
    /// Top-ranked prompt of the entity's ensemble.
    pub system_prompt: &'a str,
    pub positives: &'a [Sentence],
    pub negatives: &'a [Sentence],
    pub golds: &'a BTreeMap<SentenceKey, Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SftConfig {
    pub val_ratio: f64,
    /// Training negatives per training positive.
    pub train_neg_multiplier: usize,
    pub seed: u64,
}

impl Default for SftConfig {
    fn default() -> Self {
        Self { val_ratio: 0.1, train_neg_multiplier: 3, seed: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SftEntityStats {
    pub train_pos: usize,
    pub train_neg: usize,
    pub val_pos: usize,
    pub val_neg: usize,
    pub available_neg: usize,
    /// Corpus negatives per positive, used to size the validation negatives.
    pub corpus_neg_per_pos: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SftDataset {
    pub train: Vec<SftExample>,
    pub val: Vec<SftExample>,
    pub stats: BTreeMap<String, SftEntityStats>,
    pub skipped: Vec<String>,
}

fn sorted_shuffled(list: &[Sentence], rng: &mut ChaCha8Rng) -> Vec<Sentence> {
    let mut v = list.to_vec();
    v.sort_by_key(|s| s.key());
    v.shuffle(rng);
    v
}

/// Splits each entity's positives 9:1, adds training negatives at the
/// configured multiple and validation negatives at the corpus ratio.
pub fn build_sft_dataset(sources: &[SftSource<'_>], cfg: &SftConfig) -> SftDataset {
    let mut out = SftDataset::default();
    for src in sources {
        let n = src.positives.len();
        if n == 0 {
            warn!(entity = src.entity, "no positive sentences, skipped");
            out.skipped.push(src.entity.to_string());
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ stable_hash(src.entity) ^ stable_hash("sft"));
        let pos = sorted_shuffled(src.positives, &mut rng);
        let neg = sorted_shuffled(src.negatives, &mut rng);

        let mut n_val = (cfg.val_ratio * n as f64 + 1e-9).floor() as usize;
        if n >= 10 {
            n_val = n_val.max(1);
        }
        let (val_pos, train_pos) = pos.split_at(n_val);
        let n_train_neg = (cfg.train_neg_multiplier * train_pos.len()).min(neg.len());
        let ratio = neg.len() as f64 / n as f64;
        let n_val_neg = ((val_pos.len() as f64 * ratio).round() as usize).min(neg.len() - n_train_neg);
        let (train_neg, rest) = neg.split_at(n_train_neg);
        let val_neg = &rest[..n_val_neg];

        let golds_of = |s: &Sentence| src.golds.get(&s.key()).cloned().unwrap_or_default();
        let mk = |s: &Sentence, g: Vec<String>| SftExample::new(src.system_prompt, &s.text, &g, src.entity);
        out.train.extend(train_pos.iter().map(|s| mk(s, golds_of(s))));
        out.train.extend(train_neg.iter().map(|s| mk(s, Vec::new())));
        out.val.extend(val_pos.iter().map(|s| mk(s, golds_of(s))));
        out.val.extend(val_neg.iter().map(|s| mk(s, Vec::new())));
        out.stats.insert(
            src.entity.to_string(),
            SftEntityStats {
                train_pos: train_pos.len(),
                train_neg: train_neg.len(),
                val_pos: val_pos.len(),
                val_neg: val_neg.len(),
                available_neg: neg.len(),
                corpus_neg_per_pos: ratio,
            },
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub prompt: Vec<ChatMessage>,
    pub chosen: String,
    pub rejected: String,
}

/// The model's answer line: the last sentinel line, or the whole trimmed
/// reply when it has none.
pub fn raw_answer_line(reply: &str) -> String {
    sentinel_line(reply).unwrap_or_else(|| reply.trim()).to_string()
}

/// Whether `reply` gets any false positive or false negative against the
/// example's golds.
pub fn is_incorrect(example: &SftExample, reply: &str, threshold: f64) -> bool {
    let predicted = parse_extraction(reply).answer;
    let c = match_entities(&predicted, &example.golds(), threshold);
    c.fp > 0 || c.fn_ > 0
}

/// One pair per example the fine-tuned model got wrong. `replies[i]` is the
/// model output for `examples[i]`; `None` marks a failed request and is
/// skipped.
pub fn build_dpo_dataset(examples: &[SftExample], replies: &[Option<String>], threshold: f64) -> Vec<PreferencePair> {
    assert_eq!(examples.len(), replies.len(), "one reply per example");
    examples
        .iter()
        .zip(replies)
        .filter_map(|(ex, reply)| {
            let reply = reply.as_deref()?;
            if !is_incorrect(ex, reply, threshold) {
                return None;
            }
            let chosen = ex.assistant().to_string();
            let rejected = raw_answer_line(reply);
            if rejected == chosen {
                return None;
            }
            Some(PreferencePair {
                prompt: vec![ChatMessage::system(ex.system()), ChatMessage::user(ex.user())],
                chosen,
                rejected,
            })
        })
        .collect()
}

/// Queries the fine-tuned model with each example's system and user
/// messages.
pub fn predict_sft(examples: &[SftExample], model: &str, inf: &Inference<'_>) -> Vec<Result<String, BackendError>> {
    let requests: Vec<GenerationRequest> = examples
        .iter()
        .map(|ex| {
            GenerationRequest::new(
                vec![ChatMessage::system(ex.system()), ChatMessage::user(ex.user())],
                inf.max_new_tokens,
            )
            .with_model(model)
        })
        .collect();
    execute_with_retry(&requests, &inf.policy, inf.backend, inf.ledger, "sft-prediction")
        .results
        .into_iter()
        .map(|r| r.map(|r| r.text))
        .collect()
}

pub const DPO_MIN_F1: f64 = 0.6;

/// Preference optimization is worth running only when micro or macro F1 is
/// strictly above `min_f1`.
pub fn gate_for_dpo<T: Scalar>(report: &MetricsReport<T>, min_f1: f64) -> bool {
    report.micro.f1.to_f64() > min_f1 || report.macro_avg.f1.to_f64() > min_f1
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}
