//! Indel-based string similarity.
//!
//! `indel_similarity` is the normalized insert/delete edit similarity on a
//! 0..=100 scale. `partial_similarity` is the best indel similarity between the
//! shorter string and any contiguous window of the longer one. Both operate on
//! Unicode scalar values, not bytes.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A similarity on the closed interval `[0, 100]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub const MAX: SimilarityScore = SimilarityScore(100.0);

    pub fn value(self) -> f64 {
        self.0
    }

    /// Inclusive threshold test ("reached at least").
    pub fn reaches(self, threshold: f64) -> bool {
        self.0 >= threshold
    }

    fn from_distance(distance: usize, total: usize) -> Self {
        if total == 0 {
            return Self::MAX;
        }
        SimilarityScore(100.0 * (1.0 - distance as f64 / total as f64))
    }
}

impl fmt::Display for SimilarityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.0)
    }
}

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut row = vec![0usize; b.len() + 1];
    for &ca in a {
        let mut diag = 0;
        for (k, &cb) in b.iter().enumerate() {
            let up = row[k + 1];
            row[k + 1] = if ca == cb { diag + 1 } else { up.max(row[k]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// `100 * (1 - D / (|a| + |b|))` where `D` is the insert/delete distance.
/// Two empty strings score 100.
pub fn indel_similarity(a: &str, b: &str) -> SimilarityScore {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    indel_chars(&a, &b)
}

fn indel_chars(a: &[char], b: &[char]) -> SimilarityScore {
    let total = a.len() + b.len();
    let lcs = lcs_len(a, b);
    SimilarityScore::from_distance(total - 2 * lcs, total)
}

/// Maximum of [`indel_similarity`] between the shorter input and every
/// contiguous substring (including the empty one) of the longer input. When
/// both inputs have the same length the larger of the two directions is
/// returned, so the function is symmetric.
pub fn partial_similarity(a: &str, b: &str) -> SimilarityScore {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    match a.len().cmp(&b.len()) {
        std::cmp::Ordering::Less => best_window(&a, &b),
        std::cmp::Ordering::Greater => best_window(&b, &a),
        std::cmp::Ordering::Equal => {
            let forward = best_window(&a, &b);
            let backward = best_window(&b, &a);
            if backward > forward {
                backward
            } else {
                forward
            }
        }
    }
}

/// Best window score of `short` against `long`.
///
/// The optimum is always attained by the empty window or by a window whose
/// first and last characters occur in `short` (trimming an unmatched edge
/// character keeps the LCS and shrinks the denominator), so only those are
/// scored. The running best is tracked as an exact `(lcs, window)` pair and
/// converted to a float once, which yields exactly the value an exhaustive
/// search would produce.
fn best_window(short: &[char], long: &[char]) -> SimilarityScore {
    let m = short.len();
    if m == 0 {
        return SimilarityScore::MAX;
    }
    if contains_run(long, short) {
        return SimilarityScore::MAX;
    }

    let mut alphabet: Vec<char> = short.to_vec();
    alphabet.sort_unstable();
    alphabet.dedup();
    let in_short = |c: &char| alphabet.binary_search(c).is_ok();

    // best ratio lcs / (m + w); the empty window gives 0 / m.
    let (mut best_lcs, mut best_total) = (0usize, m);
    let mut row = vec![0usize; m + 1];

    for start in 0..long.len() {
        if !in_short(&long[start]) {
            continue;
        }
        row.iter_mut().for_each(|v| *v = 0);
        for end in start..long.len() {
            let c = long[end];
            let mut diag = 0;
            for k in 0..m {
                let up = row[k + 1];
                row[k + 1] = if c == short[k] { diag + 1 } else { up.max(row[k]) };
                diag = up;
            }
            let lcs = row[m];
            let total = m + (end - start + 1);
            if in_short(&c) && lcs * best_total > best_lcs * total {
                best_lcs = lcs;
                best_total = total;
            }
            // Longer windows from this start can score at most m / (total + 1).
            if lcs == m || m * best_total <= best_lcs * (total + 1) {
                break;
            }
        }
    }
    SimilarityScore::from_distance(best_total - 2 * best_lcs, best_total)
}

fn contains_run(haystack: &[char], needle: &[char]) -> bool {
    needle.is_empty() || haystack.windows(needle.len()).any(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive definition: every substring of the longer string, LCS by
    /// full table.
    fn brute_force(a: &str, b: &str) -> f64 {
        fn lcs_table(a: &[char], b: &[char]) -> usize {
            let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
            for i in 1..=a.len() {
                for j in 1..=b.len() {
                    t[i][j] = if a[i - 1] == b[j - 1] { t[i - 1][j - 1] + 1 } else { t[i - 1][j].max(t[i][j - 1]) };
                }
            }
            t[a.len()][b.len()]
        }
        fn one_way(s: &[char], l: &[char]) -> f64 {
            let mut best = f64::MIN;
            for i in 0..=l.len() {
                for j in i..=l.len() {
                    let w = &l[i..j];
                    let total = s.len() + w.len();
                    let d = total - 2 * lcs_table(s, w);
                    let v = if total == 0 { 100.0 } else { 100.0 * (1.0 - d as f64 / total as f64) };
                    best = best.max(v);
                }
            }
            best
        }
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        if a.len() < b.len() {
            one_way(&a, &b)
        } else if b.len() < a.len() {
            one_way(&b, &a)
        } else {
            one_way(&a, &b).max(one_way(&b, &a))
        }
    }

    #[test]
    fn indel_examples() {
        assert_eq!(indel_similarity("abc", "abc").value(), 100.0);
        assert_eq!(indel_similarity("abc", "").value(), 0.0);
        assert_eq!(indel_similarity("", "").value(), 100.0);
        // LCS("kitten", "sitting") = 4 ("ittn"), D = 13 - 8 = 5
        let k = indel_similarity("kitten", "sitting").value();
        assert_eq!(k, 100.0 * (1.0 - 5.0 / 13.0));
        assert!((k - 61.538).abs() < 1e-3);
    }

    #[test]
    fn partial_exact_substring_is_full() {
        let s = partial_similarity("Stage III", "generalized Stage III Grade B periodontitis");
        assert_eq!(s, SimilarityScore::MAX);
        assert_eq!(partial_similarity("x", "x"), SimilarityScore::MAX);
        assert_eq!(partial_similarity("", "anything"), SimilarityScore::MAX);
    }

    #[test]
    fn partial_typo_matches_oracle() {
        let got = partial_similarity("metformin", "metformn taken daily").value();
        // best window "metformn": LCS 8, 200 * 8 / 17
        assert_eq!(got, brute_force("metformin", "metformn taken daily"));
        assert_eq!(got, 100.0 * (1.0 - 1.0 / 17.0));
    }

    #[test]
    fn partial_equals_brute_force_on_fixed_cases() {
        let cases = [
            ("stage iii", "stg iii noted"),
            ("ab", "ba"),
            ("abc", "xaybzc"),
            ("male", "female partner"),
            ("hba1c 7.2%", "last a1c was 7.2 percent"),
            ("", ""),
            ("q", ""),
        ];
        for (a, b) in cases {
            assert_eq!(partial_similarity(a, b).value(), brute_force(a, b), "{a:?} vs {b:?}");
            assert_eq!(partial_similarity(b, a).value(), brute_force(a, b), "{b:?} vs {a:?}");
        }
    }

    #[test]
    fn stg_variant_crosses_threshold() {
        // window "stg iii": LCS 7, 200 * 7 / 16 = 87.5
        let s = partial_similarity("stage iii", "stg iii noted");
        assert_eq!(s.value(), brute_force("stage iii", "stg iii noted"));
        assert_eq!(s.value(), 87.5);
        assert!(s.reaches(80.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small() -> impl Strategy<Value = String> {
            "[abcx ]{0,12}"
        }

        proptest! {
            #[test]
            fn matches_exhaustive(a in small(), b in small()) {
                prop_assert_eq!(partial_similarity(&a, &b).value(), brute_force(&a, &b));
            }

            #[test]
            fn symmetric(a in small(), b in small()) {
                prop_assert_eq!(partial_similarity(&a, &b), partial_similarity(&b, &a));
            }

            #[test]
            fn partial_dominates_indel(a in small(), b in small()) {
                prop_assert!(partial_similarity(&a, &b) >= indel_similarity(&a, &b));
            }

            #[test]
            fn substring_is_full(l in small(), i in 0usize..12, n in 0usize..12) {
                let chars: Vec<char> = l.chars().collect();
                let i = i.min(chars.len());
                let j = (i + n).min(chars.len());
                let s: String = chars[i..j].iter().collect();
                prop_assert_eq!(partial_similarity(&s, &l), SimilarityScore::MAX);
            }

            #[test]
            fn bounded(a in small(), b in small()) {
                let v = partial_similarity(&a, &b).value();
                prop_assert!((0.0..=100.0).contains(&v));
            }
        }
    }
}
