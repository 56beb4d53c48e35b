//! Soft-match evaluation: similarity, one-to-one matching, micro/macro
//! aggregation and report rendering.

mod metrics;
mod report;
mod similarity;

pub use metrics::{
    auxiliary_accuracies, macro_average, macro_average_map, match_entities, match_pairs, micro_average, EntityCounts,
    MatchOutcome, Prf, SentenceOutcome, DEFAULT_MATCH_THRESHOLD,
};
pub use report::{EntityRow, MetricsReport};
pub use similarity::{indel_similarity, lcs_len, partial_similarity, SimilarityScore};
