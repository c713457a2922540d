//! Damage-level heads, per-type backbones and their ensemble.

pub mod backbone;
pub mod external;
pub mod features;
pub mod head;
pub mod meta;
pub mod model;
pub mod probs;
pub mod train;

pub const NUM_LEVELS: usize = 5;
pub const FEATURE_LEN: usize = 17;
pub const META_LEN: usize = 15;
/// Features followed by meta.
pub const INPUT_LEN: usize = FEATURE_LEN + META_LEN;
/// Position of the overall hazard entry in the head input.
pub const HAZARD_INPUT_INDEX: usize = FEATURE_LEN + meta::META_HAZARD_INDEX;

pub use backbone::{
    ensemble_predict, route, route_named, Backbone, BackboneKind, BackboneRegistry, CoOccurrence,
    ReferenceBackbone, RoutingWeights,
};
pub use external::{ExternalBackbone, InferRequest, InferResponse, Transport, DEFAULT_TIMEOUT_MS};
pub use features::{extract_features, luminance, FeatureVector};
pub use head::{head_input, project_increasing, Head, OrdinalHead, SoftmaxHead, Standardizer, Trainable, MIN_CUT_GAP};
pub use meta::{meta_vector, meta_vector_named, MetaVector, META_HAZARD_INDEX};
pub use model::ModelFile;
pub use probs::{
    argmax_level, classify, cross_entropy, expected_level, loss, ordinal_cross_entropy, ordinal_factor,
    ordinal_probs, sigmoid, softmax, DamageLevel, LossKind, CE_EPSILON, DEFAULT_TAU,
};
pub use train::{accuracy, batch_loss_grad, initialize, train, EpochRecord, InitKind, TrainConfig, TrainOutcome, TrainingSample};
