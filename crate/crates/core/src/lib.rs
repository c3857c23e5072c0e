//! Differentiation metrics for learner representations.
//!
//! Builds interaction-level and learner-level representation sets from
//! timestamped interaction logs, then scores how well each one separates
//! learners: mean normalized pairwise distance, silhouette over a k-means
//! partition, same/different verification AUC, and the uniqueness threshold.

pub mod builders;
pub mod clustering;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod seeding;
pub mod synth;
pub mod verification;

pub use error::{Error, Result};
pub use model::{
    validate_representation_set, EmbeddingSource, FeatureBlock, InteractionRecord, LearnerId,
    RepresentationSet, SignatureSchema,
};
pub use pipeline::{evaluate, run, Evaluation, RepresentationKind, RunConfig, RunOutput};
pub use report::{compare, render, ComparisonTable, Document, EvaluationReport, Format};
