use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::similarity::partial_similarity;
use crate::scalar::Scalar;
use crate::text::fold;

/// Default soft-match threshold on the 0..=100 similarity scale.
pub const DEFAULT_MATCH_THRESHOLD: f64 = 80.0;

/// True-positive / false-positive / false-negative counts for one entity type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl EntityCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }

    pub fn is_exact(&self) -> bool {
        self.fp == 0 && self.fn_ == 0
    }
}

impl std::ops::Add for EntityCounts {
    type Output = EntityCounts;

    fn add(self, rhs: Self) -> Self {
        EntityCounts::new(self.tp + rhs.tp, self.fp + rhs.fp, self.fn_ + rhs.fn_)
    }
}

impl std::ops::AddAssign for EntityCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for EntityCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(EntityCounts::default(), |a, b| a + b)
    }
}

/// Precision, recall and F1 over any [`Scalar`].
///
/// Precision is 0 when nothing was predicted, recall is 0 when there is no
/// gold, and F1 is 0 whenever `P + R = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

impl<T: Scalar> Prf<T> {
    pub fn zero() -> Self {
        Self { precision: T::zero(), recall: T::zero(), f1: T::zero() }
    }

    pub fn from_counts(counts: EntityCounts) -> Self {
        let precision = ratio::<T>(counts.tp, counts.tp + counts.fp);
        let recall = ratio::<T>(counts.tp, counts.tp + counts.fn_);
        Self { precision, recall, f1: harmonic(precision, recall) }
    }
}

fn ratio<T: Scalar>(num: u64, den: u64) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::from_count(num) / T::from_count(den)
    }
}

fn harmonic<T: Scalar>(p: T, r: T) -> T {
    let sum = p + r;
    if sum == T::zero() {
        T::zero()
    } else {
        let two = T::one() + T::one();
        two * p * r / sum
    }
}

/// One-to-one greedy soft matching result: accepted `(pred, gold)` index pairs
/// and the resulting counts.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchOutcome {
    pub pairs: Vec<(usize, usize)>,
    pub counts: EntityCounts,
}

/// Greedy one-to-one matching between predicted and gold surface strings.
///
/// Both sides are case-folded and whitespace-normalized. Predictions that are
/// empty after normalization are discarded before matching. Every pair whose
/// partial similarity reaches `threshold` is a candidate; candidates are
/// accepted in order of decreasing similarity (ties: lower gold index, then
/// lower prediction index) when neither side is already matched.
pub fn match_pairs<P: AsRef<str>, G: AsRef<str>>(preds: &[P], golds: &[G], threshold: f64) -> MatchOutcome {
    let preds: Vec<(usize, String)> =
        preds.iter().enumerate().map(|(i, p)| (i, fold(p.as_ref()))).filter(|(_, p)| !p.is_empty()).collect();
    let golds: Vec<String> = golds.iter().map(|g| fold(g.as_ref())).collect();

    let mut candidates = Vec::new();
    for (pi, pred) in &preds {
        for (gi, gold) in golds.iter().enumerate() {
            let score = partial_similarity(pred, gold);
            if score.reaches(threshold) {
                candidates.push((score.value(), gi, *pi));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut pred_used = vec![false; preds.iter().map(|(i, _)| i + 1).max().unwrap_or(0)];
    let mut gold_used = vec![false; golds.len()];
    let mut pairs = Vec::new();
    for (_, gi, pi) in candidates {
        if !pred_used[pi] && !gold_used[gi] {
            pred_used[pi] = true;
            gold_used[gi] = true;
            pairs.push((pi, gi));
        }
    }
    let tp = pairs.len() as u64;
    MatchOutcome { counts: EntityCounts::new(tp, preds.len() as u64 - tp, golds.len() as u64 - tp), pairs }
}

/// Counts from [`match_pairs`].
pub fn match_entities<P: AsRef<str>, G: AsRef<str>>(preds: &[P], golds: &[G], threshold: f64) -> EntityCounts {
    match_pairs(preds, golds, threshold).counts
}

/// Pools counts across entity types, then computes P/R/F1 once.
pub fn micro_average<T: Scalar>(counts: &[EntityCounts]) -> Prf<T> {
    Prf::from_counts(counts.iter().copied().sum())
}

/// Column-wise unweighted means of per-entity P, R and F1. Macro F1 is the
/// mean of the F1 column, not the harmonic mean of macro P and macro R. An
/// empty map yields zeros.
pub fn macro_average<'a, T, I>(per_entity: I) -> Prf<T>
where
    T: Scalar,
    I: IntoIterator<Item = &'a Prf<T>>,
{
    let mut n = 0u64;
    let mut acc = Prf::<T>::zero();
    for m in per_entity {
        acc.precision = acc.precision + m.precision;
        acc.recall = acc.recall + m.recall;
        acc.f1 = acc.f1 + m.f1;
        n += 1;
    }
    if n == 0 {
        return acc;
    }
    let n = T::from_count(n);
    Prf { precision: acc.precision / n, recall: acc.recall / n, f1: acc.f1 / n }
}

/// Convenience wrapper over [`macro_average`] for keyed metrics.
pub fn macro_average_map<T: Scalar>(per_entity: &BTreeMap<String, Prf<T>>) -> Prf<T> {
    macro_average(per_entity.values())
}

/// What happened to one labeled sentence during a two-stage run.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceOutcome {
    pub positive: bool,
    pub golds: Vec<String>,
    pub extracted: Vec<String>,
}

/// `(negative_accuracy, positive_softmatch_accuracy)`.
///
/// Negative accuracy is the share of negative sentences with no final
/// extraction; positive soft-match accuracy is the share of positive sentences
/// where at least one gold span is matched at `threshold` by some extraction.
/// Either value is 0 when its sentence class is empty.
pub fn auxiliary_accuracies(outcomes: &[SentenceOutcome], threshold: f64) -> (f64, f64) {
    let (mut neg, mut neg_ok, mut pos, mut pos_ok) = (0u64, 0u64, 0u64, 0u64);
    for o in outcomes {
        if o.positive {
            pos += 1;
            let hit = o.golds.iter().any(|g| {
                let g = fold(g);
                o.extracted
                    .iter()
                    .map(|e| fold(e))
                    .filter(|e| !e.is_empty())
                    .any(|e| partial_similarity(&e, &g).reaches(threshold))
            });
            if hit {
                pos_ok += 1;
            }
        } else {
            neg += 1;
            if o.extracted.iter().all(|e| fold(e).is_empty()) {
                neg_ok += 1;
            }
        }
    }
    (ratio::<f64>(neg_ok, neg), ratio::<f64>(pos_ok, pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    #[test]
    fn zero_prediction_convention() {
        let m = Prf::<f64>::from_counts(EntityCounts::new(0, 0, 5));
        assert_eq!(m, Prf::zero());
        let m = Prf::<f64>::from_counts(EntityCounts::default());
        assert_eq!(m, Prf::zero());
    }

    #[test]
    fn micro_pools_counts() {
        let m: Prf<f64> = micro_average(&[EntityCounts::new(8, 2, 2), EntityCounts::new(1, 1, 3)]);
        assert_eq!(m.precision, 0.75);
        assert!((m.recall - 9.0 / 14.0).abs() < 1e-12);
        assert!((m.recall - 0.6429).abs() < 1e-4);
        assert!((m.f1 - 0.6923).abs() < 1e-4);
        let exact: Prf<Exact> = micro_average(&[EntityCounts::new(8, 2, 2), EntityCounts::new(1, 1, 3)]);
        assert_eq!(exact.f1, Exact::new(9, 13));
    }

    #[test]
    fn micro_single_entity_is_identity() {
        let c = EntityCounts::new(3, 1, 2);
        assert_eq!(micro_average::<f64>(&[c]), Prf::from_counts(c));
        assert_eq!(micro_average::<f64>(&[EntityCounts::default()]), Prf::zero());
    }

    #[test]
    fn macro_is_column_mean() {
        let a = Prf { precision: 1.0, recall: 1.0, f1: 1.0 };
        let b = Prf { precision: 0.0, recall: 0.0, f1: 0.0 };
        assert_eq!(macro_average([&a, &b]).f1, 0.5);
        assert_eq!(macro_average([&a]), a);
        // F1 column mean differs from harmonic mean of the P/R means
        let c = Prf::<f64>::from_counts(EntityCounts::new(1, 0, 9));
        let d = Prf::<f64>::from_counts(EntityCounts::new(9, 9, 0));
        let m = macro_average([&c, &d]);
        assert_eq!(m.f1, (c.f1 + d.f1) / 2.0);
        assert_ne!(m.f1, 2.0 * m.precision * m.recall / (m.precision + m.recall));
    }

    #[test]
    fn one_to_one_matching() {
        let c = match_entities(&["metformin"], &["metformin", "metformin"], 80.0);
        assert_eq!(c, EntityCounts::new(1, 0, 1));
        let same = ["a b", "Stage III", "aspirin"];
        assert_eq!(match_entities(&same, &same, 80.0), EntityCounts::new(3, 0, 0));
        assert_eq!(match_entities::<&str, &str>(&[], &[], 80.0), EntityCounts::default());
        assert_eq!(match_entities(&["", "  "], &["x"], 80.0), EntityCounts::new(0, 0, 1));
    }

    #[test]
    fn greedy_prefers_higher_similarity() {
        // pred 0 is exact for gold 1 (100) and close to gold 0 (~89); the exact
        // pair goes first, leaving gold 0 for pred 1.
        let out = match_pairs(&["metformin", "metformn"], &["metforman", "metformin"], 80.0);
        assert_eq!(out.counts, EntityCounts::new(2, 0, 0));
        assert_eq!(out.pairs[0], (0, 1));
        // all-100 ties resolve by gold index, then prediction index
        let out = match_pairs(&["Stage III", "Stage II"], &["stage ii", "stage iii"], 80.0);
        assert_eq!(out.pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn auxiliary_examples() {
        let pos = |g: &[&str], e: &[&str]| SentenceOutcome {
            positive: true,
            golds: g.iter().map(|s| s.to_string()).collect(),
            extracted: e.iter().map(|s| s.to_string()).collect(),
        };
        let neg = |e: &[&str]| SentenceOutcome {
            positive: false,
            golds: vec![],
            extracted: e.iter().map(|s| s.to_string()).collect(),
        };
        // 1 of 4 negatives polluted, 2 of 3 positives hit
        let trace = vec![
            neg(&[]),
            neg(&["ibuprofen"]),
            neg(&[]),
            neg(&[]),
            pos(&["metformin"], &["Metformin"]),
            pos(&["56 y/o"], &["56 y/o"]),
            pos(&["female"], &[]),
        ];
        let (n, p) = auxiliary_accuracies(&trace, 80.0);
        assert_eq!(n, 0.75);
        assert_eq!(p, 2.0 / 3.0);

        let silent = vec![neg(&[]), pos(&["x"], &[])];
        assert_eq!(auxiliary_accuracies(&silent, 80.0), (1.0, 0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn count_algebra(
                preds in proptest::collection::vec("[ab ]{0,5}", 0..6),
                golds in proptest::collection::vec("[ab]{1,5}", 0..6),
            ) {
                let kept = preds.iter().filter(|p| !fold(p).is_empty()).count() as u64;
                let c = match_entities(&preds, &golds, 80.0);
                prop_assert_eq!(c.tp + c.fp, kept);
                prop_assert_eq!(c.tp + c.fn_, golds.len() as u64);
            }

            #[test]
            fn macro_permutation_invariant_exact(
                counts in proptest::collection::vec((0u64..20, 0u64..20, 0u64..20), 1..8),
                rot in 0usize..8,
            ) {
                let rows: Vec<Prf<Exact>> = counts
                    .iter()
                    .map(|&(t, f, n)| Prf::from_counts(EntityCounts::new(t, f, n)))
                    .collect();
                let mut rotated = rows.clone();
                rotated.rotate_left(rot % rows.len());
                prop_assert_eq!(macro_average(&rows), macro_average(&rotated));
            }
        }
    }
}
