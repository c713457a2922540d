//! Building damage forecasting for hypothetical future hazards.
//!
//! The pipeline runs on pre-disaster imagery only: footprints are rasterized
//! into per-building chips, hazard-impact attributes are scored into a 1-5
//! hazard level, and an ensemble of per-disaster-type heads turns chip
//! features plus meta information into a damage-level distribution. Damage
//! maps can be swept over hazard levels and exported as GeoJSON or PNG.
//!
//! The numeric core (`ensemble`) is generic over [`Scalar`] (`f32`/`f64`);
//! the aliases below fix it to `f64`, which is what the pipeline uses.

pub mod damagemap;
pub mod dataset;
pub mod disaster;
pub mod ensemble;
pub mod error;
pub mod hazard;
pub mod rastergeom;
pub mod scalar;
pub mod synthetic;

pub use disaster::{DisasterType, DISASTER_TYPES};
pub use error::{Error, Result};
pub use scalar::Scalar;

pub use damagemap::{DamageMap, EvalReport, MapEntry, Palette, Predictor};
pub use dataset::{DamageClass, EventCatalog, LabeledBuilding};
pub use ensemble::{BackboneRegistry, DamageLevel, LossKind, RoutingWeights};
pub use hazard::{HazardAttribute, HazardAttributes, HazardLevel, ThresholdTable};
pub use rastergeom::{BitMask, Chip, ChipSet, Footprint, GeoBounds, Scene};

/// Chip feature vector in double precision.
pub type FeatureVector = ensemble::FeatureVector<f64>;
/// Meta vector in double precision.
pub type MetaVector = ensemble::MetaVector<f64>;
/// Cumulative-link head in double precision.
pub type OrdinalHead = ensemble::OrdinalHead<f64>;
/// Softmax-linear head in double precision.
pub type SoftmaxHead = ensemble::SoftmaxHead<f64>;
/// Either head kind in double precision.
pub type Head = ensemble::Head<f64>;
/// Trainer configuration in double precision.
pub type TrainConfig = ensemble::TrainConfig<f64>;
/// Training sample in double precision.
pub type TrainingSample = ensemble::TrainingSample<f64>;
/// Trainer output in double precision.
pub type TrainOutcome = ensemble::TrainOutcome<f64>;
/// Five-level probability vector.
pub type Probs = [f64; ensemble::NUM_LEVELS];
