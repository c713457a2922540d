//! xBD-style label ingestion, damage classes, event catalogs and splits.

mod catalog;
mod label;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::disaster::{normalize_token, DisasterType};
use crate::error::DatasetError;
use crate::rastergeom::Footprint;

pub use catalog::{build_catalog, split, Event, EventCatalog, SampleRef, SceneRecord};
pub use label::{parse_label_file, serialize_label_file, LabelDocument, LabelMetadata};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DamageClass {
    Unclassified,
    NoDamage,
    MinorDamage,
    MajorDamage,
    Destroyed,
}

pub const DAMAGE_CLASSES: [DamageClass; 5] = [
    DamageClass::Unclassified,
    DamageClass::NoDamage,
    DamageClass::MinorDamage,
    DamageClass::MajorDamage,
    DamageClass::Destroyed,
];

impl DamageClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DamageClass::Unclassified => "unclassified",
            DamageClass::NoDamage => "no-damage",
            DamageClass::MinorDamage => "minor-damage",
            DamageClass::MajorDamage => "major-damage",
            DamageClass::Destroyed => "destroyed",
        }
    }

    /// Inverse of [`class_to_level`] on its range.
    pub fn from_level(level: u8) -> Option<Self> {
        match level {
            1 => Some(DamageClass::NoDamage),
            2 => Some(DamageClass::MinorDamage),
            3 => Some(DamageClass::MajorDamage),
            5 => Some(DamageClass::Destroyed),
            _ => None,
        }
    }
}

impl fmt::Display for DamageClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DamageClass {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let c = match normalize_token(s).as_str() {
            "unclassified" => DamageClass::Unclassified,
            "nodamage" => DamageClass::NoDamage,
            "minordamage" => DamageClass::MinorDamage,
            "majordamage" => DamageClass::MajorDamage,
            "destroyed" => DamageClass::Destroyed,
            _ => return Err(DatasetError::UnknownDamageClass(s.to_string())),
        };
        Ok(c)
    }
}

impl Serialize for DamageClass {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DamageClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Maps the four usable classes onto the 1-5 damage scale. Level 4 has no
/// source class.
pub fn class_to_level(c: DamageClass) -> Result<u8, DatasetError> {
    match c {
        DamageClass::Unclassified => Err(DatasetError::UnclassifiedNotMappable),
        DamageClass::NoDamage => Ok(1),
        DamageClass::MinorDamage => Ok(2),
        DamageClass::MajorDamage => Ok(3),
        DamageClass::Destroyed => Ok(5),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBuilding {
    pub footprint: Footprint,
    pub damage: DamageClass,
    pub event_id: String,
    pub disaster_type: DisasterType,
    pub scene_id: String,
}

impl LabeledBuilding {
    pub fn building_id(&self) -> &str {
        &self.footprint.building_id
    }

    pub fn level(&self) -> Option<u8> {
        class_to_level(self.damage).ok()
    }
}

/// Drops unclassified buildings, keeping order.
pub fn filter_training(buildings: &[LabeledBuilding]) -> Vec<LabeledBuilding> {
    buildings
        .iter()
        .filter(|b| b.damage != DamageClass::Unclassified)
        .cloned()
        .collect()
}
