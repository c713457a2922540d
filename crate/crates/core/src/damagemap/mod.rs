//! Scene-level inference, hazard sweeps and their artifacts.

mod eval;
mod geojson;
mod render;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disaster::DisasterType;
use crate::ensemble::{
    classify, ensemble_predict, extract_features, meta_vector, BackboneRegistry, DamageLevel, FeatureVector,
    RoutingWeights, DEFAULT_TAU, NUM_LEVELS,
};
use crate::error::{MapError, Result};
use crate::hazard::{attribute_levels, overall_level, AttributeLevels, HazardAttributes, HazardLevel, ThresholdTable};
use crate::rastergeom::{chip_set, ChipSet, Footprint, Scene, DEFAULT_CHIP_SIZE};

pub use eval::{evaluate, evaluate_levels, EvalReport};
pub use geojson::{parse_geojson, to_geojson, to_geojson_with};
pub use render::{encode_png, render, render_png, Color, Palette};

/// Per-building prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub building_id: String,
    pub level: DamageLevel,
    pub probs: [f64; NUM_LEVELS],
    /// The footprint covered no pixel center; the entry carries a uniform
    /// distribution and is always unclassified.
    #[serde(default)]
    pub skipped: bool,
}

/// Damage predictions for every footprint of a scene at one hazard level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageMap {
    pub scene_id: String,
    pub disaster_type: DisasterType,
    pub hazard_level: HazardLevel,
    pub palette_id: String,
    pub entries: Vec<MapEntry>,
}

impl DamageMap {
    pub fn entry(&self, building_id: &str) -> Option<&MapEntry> {
        self.entries.iter().find(|e| e.building_id == building_id)
    }

    /// Entries must line up with `footprints` one to one, in order.
    pub fn check_footprints(&self, footprints: &[Footprint]) -> Result<(), MapError> {
        let aligned = self.entries.len() == footprints.len()
            && self.entries.iter().zip(footprints).all(|(e, f)| e.building_id == f.building_id);
        if aligned {
            Ok(())
        } else {
            Err(MapError::FootprintMismatch {
                entries: self.entries.len(),
                footprints: footprints.len(),
            })
        }
    }
}

/// Hazard description for one prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum HazardInput {
    /// Impact attributes; the overall level is their scored mean.
    Attributes(HazardAttributes),
    /// An explicit overall level with no attribute detail.
    Level(HazardLevel),
}

impl HazardInput {
    pub fn resolve(&self, table: &ThresholdTable) -> Result<(HazardLevel, AttributeLevels)> {
        Ok(match self {
            HazardInput::Attributes(a) => (overall_level(a, table)?, attribute_levels(a, table)?),
            HazardInput::Level(l) => (*l, [None; 7]),
        })
    }
}

/// Chips and their features, computed once per scene.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    pub chips: ChipSet,
    pub features: Vec<FeatureVector<f64>>,
    footprint_ids: Vec<String>,
}

/// Everything needed to turn a scene into damage maps.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub registry: BackboneRegistry,
    pub thresholds: ThresholdTable,
    pub tau: f64,
    pub chip_size: usize,
    pub palette_id: String,
}

impl Predictor {
    pub fn new(registry: BackboneRegistry) -> Self {
        Predictor {
            registry,
            thresholds: ThresholdTable::default(),
            tau: DEFAULT_TAU,
            chip_size: DEFAULT_CHIP_SIZE,
            palette_id: Palette::default().id,
        }
    }

    pub fn prepare(&self, scene: &Scene, footprints: &[Footprint]) -> Result<PreparedScene> {
        let chips = chip_set(scene, footprints, self.chip_size)?;
        let features = chips.chips.par_iter().map(extract_features::<f64>).collect();
        Ok(PreparedScene {
            chips,
            features,
            footprint_ids: footprints.iter().map(|f| f.building_id.clone()).collect(),
        })
    }

    /// One damage map from already prepared chips.
    pub fn predict_prepared(
        &self,
        prepared: &PreparedScene,
        scene_id: &str,
        disaster_type: DisasterType,
        overall: HazardLevel,
        attr_levels: &AttributeLevels,
    ) -> Result<DamageMap> {
        let weights: RoutingWeights = self.registry.route(disaster_type)?;
        let meta = meta_vector::<f64>(disaster_type, overall, attr_levels);
        let probs: Vec<[f64; NUM_LEVELS]> = prepared
            .chips
            .chips
            .par_iter()
            .zip(&prepared.features)
            .map(|(chip, f)| ensemble_predict(chip, f, &meta, &self.registry, &weights))
            .collect::<Result<_, _>>()?;

        let mut predicted = prepared.chips.chips.iter().zip(probs);
        let mut skipped = prepared.chips.skipped.iter().map(|s| s.index).peekable();
        let mut entries = Vec::with_capacity(prepared.footprint_ids.len());
        for (i, id) in prepared.footprint_ids.iter().enumerate() {
            if skipped.peek() == Some(&i) {
                skipped.next();
                entries.push(MapEntry {
                    building_id: id.clone(),
                    level: DamageLevel::Unclassified,
                    probs: [1.0 / NUM_LEVELS as f64; NUM_LEVELS],
                    skipped: true,
                });
                continue;
            }
            let (chip, p) = predicted.next().expect("one chip per unskipped footprint");
            debug_assert_eq!(&chip.building_id, id);
            entries.push(MapEntry {
                building_id: id.clone(),
                level: classify(&p, self.tau),
                probs: p,
                skipped: false,
            });
        }
        Ok(DamageMap {
            scene_id: scene_id.to_string(),
            disaster_type,
            hazard_level: overall,
            palette_id: self.palette_id.clone(),
            entries,
        })
    }

    pub fn predict_scene(
        &self,
        scene: &Scene,
        footprints: &[Footprint],
        disaster_type: DisasterType,
        hazard: &HazardInput,
    ) -> Result<DamageMap> {
        let (overall, attr_levels) = hazard.resolve(&self.thresholds)?;
        let prepared = self.prepare(scene, footprints)?;
        self.predict_prepared(&prepared, &scene.scene_id, disaster_type, overall, &attr_levels)
    }

    /// One map per requested level. Chips and features are computed once and
    /// only the overall hazard entry of the meta vector changes between runs.
    pub fn sweep(
        &self,
        scene: &Scene,
        footprints: &[Footprint],
        disaster_type: DisasterType,
        attrs: Option<&HazardAttributes>,
        levels: &[HazardLevel],
    ) -> Result<Vec<DamageMap>> {
        if levels.is_empty() {
            return Err(MapError::InvalidLevels.into());
        }
        let attr_levels = match attrs {
            Some(a) => attribute_levels(a, &self.thresholds)?,
            None => [None; 7],
        };
        let prepared = self.prepare(scene, footprints)?;
        levels
            .iter()
            .map(|&l| self.predict_prepared(&prepared, &scene.scene_id, disaster_type, l, &attr_levels))
            .collect()
    }
}

/// Parses a comma-separated level list such as `3,4,5`.
pub fn parse_levels(text: &str) -> Result<Vec<HazardLevel>, MapError> {
    let levels = text
        .split(',')
        .map(|t| t.trim().parse::<i64>().ok().and_then(|n| HazardLevel::new(n).ok()))
        .collect::<Option<Vec<_>>>()
        .ok_or(MapError::InvalidLevels)?;
    if levels.is_empty() {
        return Err(MapError::InvalidLevels);
    }
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::BackboneKind;
    use image::{Rgb, RgbImage};

    fn scene() -> Scene {
        let img = RgbImage::from_fn(32, 32, |x, y| Rgb([(x * 8) as u8, (y * 8) as u8, 90]));
        Scene::new("s1", img, None).unwrap()
    }

    fn fps() -> Vec<Footprint> {
        vec![
            Footprint::rect("a", 2.0, 2.0, 10.0, 9.0),
            // Covers no pixel center.
            Footprint::rect("thin", 20.2, 3.1, 20.4, 3.3),
            Footprint::rect("b", 14.0, 14.0, 30.0, 28.0),
        ]
    }

    #[test]
    fn one_entry_per_footprint_in_order() {
        let p = Predictor::new(BackboneRegistry::prior(BackboneKind::ReferenceOrdinal));
        let m = p
            .predict_scene(&scene(), &fps(), DisasterType::Flood, &HazardInput::Level(HazardLevel::new(4).unwrap()))
            .unwrap();
        let ids: Vec<_> = m.entries.iter().map(|e| e.building_id.as_str()).collect();
        assert_eq!(ids, ["a", "thin", "b"]);
        assert!(m.entries[1].skipped);
        assert_eq!(m.entries[1].level, DamageLevel::Unclassified);
        for e in &m.entries {
            assert!((e.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        m.check_footprints(&fps()).unwrap();
    }

    #[test]
    fn sweep_levels_and_errors() {
        let p = Predictor::new(BackboneRegistry::prior(BackboneKind::ReferenceSoftmax));
        let lv = |n| HazardLevel::new(n).unwrap();
        let maps = p.sweep(&scene(), &fps(), DisasterType::Fire, None, &[lv(2), lv(2)]).unwrap();
        assert_eq!(maps[0], maps[1]);
        assert!(p.sweep(&scene(), &fps(), DisasterType::Fire, None, &[]).is_err());
        assert_eq!(parse_levels("3, 4,5").unwrap(), vec![lv(3), lv(4), lv(5)]);
        assert!(parse_levels("3,6").is_err());
        assert!(parse_levels("").is_err());
    }

    #[test]
    fn attributes_feed_the_overall_level() {
        let p = Predictor::new(BackboneRegistry::prior(BackboneKind::ReferenceOrdinal));
        let attrs = HazardAttributes::default().with(crate::hazard::HazardAttribute::Fatality, 15000.0);
        let m = p
            .predict_scene(&scene(), &fps(), DisasterType::Flood, &HazardInput::Attributes(attrs))
            .unwrap();
        assert_eq!(m.hazard_level.get(), 5);
    }
}
