use serde::{Deserialize, Serialize};

use crate::disaster::DisasterType;
use crate::error::DatasetError;
use crate::hazard::{HazardAttributes, HazardLevel};
use crate::rastergeom::Footprint;

use super::{DamageClass, LabeledBuilding};

/// Label document metadata. `hazard_level` / `hazard` are optional extras
/// describing the intensity of the event that produced the labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetadata {
    pub event: String,
    pub disaster_type: String,
    pub scene_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hazard_level: Option<HazardLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hazard: Option<HazardAttributes>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureProperties {
    /// Absent on pre-disaster footprint-only files; read as unclassified.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtype: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uid: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelFeature {
    pub wkt: String,
    pub properties: FeatureProperties,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDocument {
    pub metadata: LabelMetadata,
    pub features: Vec<LabelFeature>,
}

impl LabelDocument {
    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        serde_json::from_str(text).map_err(|e| DatasetError::MalformedLabelFile(e.to_string()))
    }

    pub fn disaster_type(&self) -> Result<DisasterType, DatasetError> {
        self.metadata
            .disaster_type
            .parse()
            .map_err(|_| DatasetError::UnknownDisasterType(self.metadata.disaster_type.clone()))
    }

    pub fn buildings(&self) -> Result<Vec<LabeledBuilding>, DatasetError> {
        let disaster_type = self.disaster_type()?;
        let meta = &self.metadata;
        self.features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let id = f
                    .properties
                    .uid
                    .clone()
                    .unwrap_or_else(|| format!("{}-{i}", meta.scene_id));
                let footprint = Footprint::parse(id, &f.wkt).map_err(|source| DatasetError::Geometry {
                    scene: meta.scene_id.clone(),
                    source,
                })?;
                let damage = match &f.properties.subtype {
                    Some(s) => s.parse()?,
                    None => DamageClass::Unclassified,
                };
                Ok(LabeledBuilding {
                    footprint,
                    damage,
                    event_id: meta.event.clone(),
                    disaster_type,
                    scene_id: meta.scene_id.clone(),
                })
            })
            .collect()
    }

    pub fn footprints(&self) -> Result<Vec<Footprint>, DatasetError> {
        Ok(self.buildings()?.into_iter().map(|b| b.footprint).collect())
    }
}

/// One [`LabeledBuilding`] per feature.
pub fn parse_label_file(doc: &str) -> Result<Vec<LabeledBuilding>, DatasetError> {
    LabelDocument::parse(doc)?.buildings()
}

/// Writes the canonical label layout. Every building must share the
/// metadata's event, type and scene.
pub fn serialize_label_file(
    metadata: &LabelMetadata,
    buildings: &[LabeledBuilding],
) -> Result<String, DatasetError> {
    for b in buildings {
        if b.event_id != metadata.event
            || b.scene_id != metadata.scene_id
            || b.disaster_type.to_string() != metadata.disaster_type
        {
            return Err(DatasetError::MalformedLabelFile(format!(
                "building {} does not belong to scene {}",
                b.building_id(),
                metadata.scene_id
            )));
        }
    }
    let doc = LabelDocument {
        metadata: metadata.clone(),
        features: buildings
            .iter()
            .map(|b| LabelFeature {
                wkt: b.footprint.to_wkt(),
                properties: FeatureProperties {
                    subtype: Some(b.damage.to_string()),
                    uid: Some(b.building_id().to_string()),
                },
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc).expect("label document serializes"))
}
