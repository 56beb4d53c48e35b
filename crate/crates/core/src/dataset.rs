//! Per-entity train/validation/test sentence sets.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;
use tracing::{info, warn};

use crate::backend::{ChatMessage, GenerationRequest};
use crate::corpus::{Sentence, SentenceKey};
use crate::ensemble::Inference;
use crate::scheduler::execute_with_retry;
use crate::text::stable_hash;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub ratios: [f64; 3],
    pub neg_multipliers: [usize; 3],
    pub min_positives: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { ratios: [0.8, 0.1, 0.1], neg_multipliers: [3, 10, 100], min_positives: 10, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("invalid split config: {0}")]
pub struct SplitConfigError(pub String);

impl SplitConfig {
    pub fn validate(&self) -> Result<(), SplitConfigError> {
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.ratios.iter().any(|r| *r < 0.0) {
            return Err(SplitConfigError(format!("ratios must be non-negative and sum to 1, got {:?}", self.ratios)));
        }
        if self.neg_multipliers.contains(&0) {
            return Err(SplitConfigError("negative multipliers must be at least 1".into()));
        }
        if self.min_positives == 0 {
            return Err(SplitConfigError("min_positives must be at least 1".into()));
        }
        Ok(())
    }

    /// Seed for one entity, so entities do not share shuffles.
    pub fn entity_seed(&self, entity: &str) -> u64 {
        self.seed ^ stable_hash(entity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Val,
    Test,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Val => "val",
            Subset::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityDataset {
    pub entity: String,
    pub train_pos: Vec<Sentence>,
    pub train_neg: Vec<Sentence>,
    pub val_pos: Vec<Sentence>,
    pub val_neg: Vec<Sentence>,
    pub test_pos: Vec<Sentence>,
    pub test_neg: Vec<Sentence>,
    /// Fewer positives than `min_positives`: the same positives form both the
    /// generation set (train) and the evaluation set (test); val is empty.
    pub small_entity_mode: bool,
    /// Gold texts for every positive sentence.
    #[serde(with = "gold_entries")]
    pub golds: BTreeMap<SentenceKey, Vec<String>>,
}

impl EntityDataset {
    pub fn subset(&self, subset: Subset) -> (&[Sentence], &[Sentence]) {
        match subset {
            Subset::Train => (&self.train_pos, &self.train_neg),
            Subset::Val => (&self.val_pos, &self.val_neg),
            Subset::Test => (&self.test_pos, &self.test_neg),
        }
    }

    /// The subset prompts are tuned on: validation, or the generation set in
    /// small-entity mode.
    pub fn tuning_subset(&self) -> Subset {
        if self.small_entity_mode {
            Subset::Train
        } else {
            Subset::Val
        }
    }

    pub fn golds_of(&self, sentence: &Sentence) -> &[String] {
        self.golds.get(&sentence.key()).map_or(&[], |g| g.as_slice())
    }

    /// One line per sentence: `note_id, index, subset, polarity`, tab
    /// separated, after a header naming the entity and the negative pool.
    pub fn manifest_tsv(&self) -> String {
        let mut out = format!(
            "# entity\t{}\n# small_entity_mode\t{}\n# negative_pool\tcorpus-wide\nnote_id\tindex\tsubset\tpolarity\n",
            self.entity, self.small_entity_mode
        );
        let parts = [
            (Subset::Train, "positive", &self.train_pos),
            (Subset::Train, "negative", &self.train_neg),
            (Subset::Val, "positive", &self.val_pos),
            (Subset::Val, "negative", &self.val_neg),
            (Subset::Test, "positive", &self.test_pos),
            (Subset::Test, "negative", &self.test_neg),
        ];
        for (subset, polarity, list) in parts {
            for s in list {
                out.push_str(&format!("{}\t{}\t{}\t{}\n", s.note_id, s.index, subset.as_str(), polarity));
            }
        }
        out
    }
}

/// Serializes the gold map as a list of `{note_id, index, texts}` records,
/// since JSON object keys must be strings.
mod gold_entries {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        note_id: String,
        index: usize,
        texts: Vec<String>,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<SentenceKey, Vec<String>>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter().map(|(k, v)| Entry { note_id: k.note_id.clone(), index: k.index, texts: v.clone() }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<SentenceKey, Vec<String>>, D::Error> {
        let entries: Vec<Entry> = Vec::deserialize(d)?;
        Ok(entries.into_iter().map(|e| (SentenceKey { note_id: e.note_id, index: e.index }, e.texts)).collect())
    }
}

fn floor_share(ratio: f64, n: usize) -> usize {
    (ratio * n as f64 + 1e-9).floor() as usize
}

/// Splits labeled sentences for one entity.
///
/// Inputs are sorted by sentence key before shuffling, so the result depends
/// only on the sentence sets and the seed.
pub fn split(
    entity: &str,
    positives: &[Sentence],
    negatives: &[Sentence],
    golds: &BTreeMap<SentenceKey, Vec<String>>,
    cfg: &SplitConfig,
) -> EntityDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.entity_seed(entity));
    let mut pos = positives.to_vec();
    pos.sort_by_key(|s| s.key());
    pos.shuffle(&mut rng);
    let mut neg = negatives.to_vec();
    neg.sort_by_key(|s| s.key());
    neg.shuffle(&mut rng);

    let n = pos.len();
    let [m_train, m_val, m_test] = cfg.neg_multipliers;
    let mut neg_iter = neg.into_iter();
    let mut draw = |want: usize, what: &str| -> Vec<Sentence> {
        let got: Vec<Sentence> = neg_iter.by_ref().take(want).collect();
        if got.len() < want {
            warn!(entity, subset = what, want, got = got.len(), "negative pool exhausted");
        }
        got
    };
    let keep_golds = |list: &[Sentence]| -> Vec<(SentenceKey, Vec<String>)> {
        list.iter().filter_map(|s| golds.get(&s.key()).map(|g| (s.key(), g.clone()))).collect()
    };

    if n < cfg.min_positives {
        info!(entity, positives = n, "small-entity mode");
        let train_neg = draw(m_train * n, "train");
        let test_neg = draw(m_test * n, "test");
        let g = keep_golds(&pos).into_iter().collect();
        return EntityDataset {
            entity: entity.to_string(),
            train_pos: pos.clone(),
            train_neg,
            val_pos: Vec::new(),
            val_neg: Vec::new(),
            test_pos: pos,
            test_neg,
            small_entity_mode: true,
            golds: g,
        };
    }

    let clamp = |c: usize| if n >= 10 { c.max(1) } else { c };
    let n_val = clamp(floor_share(cfg.ratios[1], n));
    let n_test = clamp(floor_share(cfg.ratios[2], n));
    let n_train = n.saturating_sub(n_val + n_test);
    let test_pos = pos.split_off(n_train + n_val);
    let val_pos = pos.split_off(n_train);
    let train_pos = pos;
    let train_neg = draw(m_train * train_pos.len(), "train");
    let val_neg = draw(m_val * val_pos.len(), "val");
    let test_neg = draw(m_test * test_pos.len(), "test");
    let g = [&train_pos, &val_pos, &test_pos].into_iter().flat_map(|l| keep_golds(l)).collect();
    EntityDataset {
        entity: entity.to_string(),
        train_pos,
        train_neg,
        val_pos,
        val_neg,
        test_pos,
        test_neg,
        small_entity_mode: false,
        golds: g,
    }
}

/// What the revision step did.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionLog {
    pub entity: String,
    pub kept: Vec<SentenceKey>,
    pub dropped: Vec<SentenceKey>,
    /// Set when the model answer was not used and the input was kept as is.
    pub fallback: Option<String>,
}

pub const KEEP_SENTINEL: &str = "KEEP:";

pub fn revision_request(entity: &str, positives: &[Sentence], max_new_tokens: usize) -> GenerationRequest {
    let mut user = format!(
        "Task: revise training examples\nEntity: {entity}\n\
         Below are sentences that contain at least one {entity} mention. Remove near-duplicates and \
         low-quality or ambiguous examples. Keep the rest.\n\n"
    );
    for (i, s) in positives.iter().enumerate() {
        user.push_str(&format!("[{i}] {}\n", s.text));
    }
    user.push_str("\nEnd with one line `KEEP: <comma-separated indices>`, or `KEEP: ALL` to keep every sentence.");
    GenerationRequest::new(
        vec![
            ChatMessage::system("You curate training examples for clinical named entity recognition."),
            ChatMessage::user(user),
        ],
        max_new_tokens,
    )
}

/// Kept indices from the last `KEEP:` line, sorted and deduplicated. `None`
/// when the answer is missing, malformed, empty or out of range.
pub fn parse_keep(text: &str, n: usize) -> Option<Vec<usize>> {
    let line = text.lines().rev().find_map(|l| {
        let t = l.trim().trim_matches(['*', '`']);
        t.get(..KEEP_SENTINEL.len())
            .filter(|h| h.eq_ignore_ascii_case(KEEP_SENTINEL))
            .map(|_| t[KEEP_SENTINEL.len()..].trim().trim_matches(['*', '`', '.', '[', ']']).trim())
    })?;
    if line.eq_ignore_ascii_case("all") {
        return Some((0..n).collect());
    }
    let mut idx =
        line.split(',').map(|p| p.trim().parse::<usize>().ok().filter(|i| *i < n)).collect::<Option<Vec<_>>>()?;
    idx.sort_unstable();
    idx.dedup();
    if idx.is_empty() {
        None
    } else {
        Some(idx)
    }
}

/// Asks the model which positives to keep. Any failure keeps the input.
pub fn revise_positives(entity: &str, positives: &[Sentence], inf: &Inference<'_>) -> (Vec<Sentence>, RevisionLog) {
    let mut log = RevisionLog { entity: entity.to_string(), ..RevisionLog::default() };
    let identity = |mut log: RevisionLog, why: String| {
        warn!(entity, reason = %why, "revision kept the original positives");
        log.kept = positives.iter().map(Sentence::key).collect();
        log.fallback = Some(why);
        (positives.to_vec(), log)
    };
    if positives.is_empty() {
        return (Vec::new(), log);
    }
    let req = revision_request(entity, positives, inf.max_new_tokens);
    let out = execute_with_retry(std::slice::from_ref(&req), &inf.policy, inf.backend, inf.ledger, "revision");
    let text = match out.results.into_iter().next() {
        Some(Ok(r)) => r.text,
        Some(Err(e)) => return identity(log, format!("backend error: {e}")),
        None => return identity(log, "no response".into()),
    };
    let Some(keep) = parse_keep(&text, positives.len()) else {
        return identity(log, "unparseable answer".into());
    };
    let mut kept = Vec::new();
    for (i, s) in positives.iter().enumerate() {
        if keep.binary_search(&i).is_ok() {
            log.kept.push(s.key());
            kept.push(s.clone());
        } else {
            log.dropped.push(s.key());
        }
    }
    (kept, log)
}
