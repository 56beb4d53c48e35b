//! Self-generated, self-verified prompt ensembles for clinical named entity
//! recognition with locally served language models.
//!
//! The pipeline segments notes into sentences, builds per-entity example
//! sets, has the model write and refine its own extraction prompts, selects
//! an ensemble per entity, runs two-stage (screen, then extract) inference,
//! scores predictions with soft string matching, and exports fine-tuning and
//! preference datasets. Every stage runs against a scripted mock backend as
//! well as a chat-completions endpoint.

pub mod backend;
pub mod corpus;
pub mod dataset;
pub mod ensemble;
pub mod evalkit;
pub mod posttrain;
pub mod promptgen;
pub mod scalar;
pub mod scheduler;
pub mod text;

pub use scalar::{Exact, Scalar};

pub type Metrics = evalkit::Prf<f64>;
pub type MetricsF32 = evalkit::Prf<f32>;
pub type ExactMetrics = evalkit::Prf<Exact>;
pub type MetricsReport = evalkit::MetricsReport<f64>;
pub type ExactMetricsReport = evalkit::MetricsReport<Exact>;
