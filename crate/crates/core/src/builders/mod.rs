//! Interaction-level and learner-level representation builders.

pub mod normalize;
pub mod projection;
pub mod signature;

pub use normalize::{
    apply_normalization, MinMaxScaler, NormalizationKind, NormalizationSpec, ZeroRangePolicy,
};
pub use projection::{random_projection, ProjectionMatrix};
pub use signature::{
    build_interaction_mean, build_learner_signature, default_signature_schema,
    prefix_instantiations, SignatureBuilder,
};
