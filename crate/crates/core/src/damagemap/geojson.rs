use serde::{Deserialize, Serialize};

use crate::disaster::DisasterType;
use crate::ensemble::{DamageLevel, NUM_LEVELS};
use crate::error::MapError;
use crate::hazard::HazardLevel;
use crate::rastergeom::{Footprint, GeoBounds, Scene};

use super::{DamageMap, MapEntry};

#[derive(Serialize, Deserialize)]
struct Collection {
    #[serde(rename = "type")]
    kind: String,
    scene_id: String,
    disaster_type: DisasterType,
    hazard_level: HazardLevel,
    palette_id: String,
    features: Vec<Feature>,
}

#[derive(Serialize, Deserialize)]
struct Feature {
    #[serde(rename = "type")]
    kind: String,
    geometry: Geometry,
    properties: Properties,
}

#[derive(Serialize, Deserialize)]
struct Geometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct Properties {
    building_id: String,
    damage_level: DamageLevel,
    probs: [f64; NUM_LEVELS],
    hazard_level: HazardLevel,
    #[serde(default)]
    skipped: bool,
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// GeoJSON for a map using the scene's own bounds.
pub fn to_geojson(map: &DamageMap, footprints: &[Footprint], scene: &Scene) -> Result<String, MapError> {
    let bounds = scene.geo_bounds.ok_or(MapError::MissingGeoBounds)?;
    to_geojson_with(map, footprints, &bounds, scene.width(), scene.height())
}

/// FeatureCollection with one polygon per footprint in (lng, lat) order,
/// coordinates rounded to 6 decimals. Probabilities keep full precision.
pub fn to_geojson_with(
    map: &DamageMap,
    footprints: &[Footprint],
    bounds: &GeoBounds,
    width: usize,
    height: usize,
) -> Result<String, MapError> {
    map.check_footprints(footprints)?;
    let features = map
        .entries
        .iter()
        .zip(footprints)
        .map(|(e, fp)| Feature {
            kind: "Feature".into(),
            geometry: Geometry {
                kind: "Polygon".into(),
                coordinates: fp
                    .rings
                    .iter()
                    .map(|ring| {
                        ring.iter()
                            .map(|&(x, y)| {
                                let (lng, lat) = bounds.pixel_to_lng_lat(x, y, width, height);
                                [round6(lng), round6(lat)]
                            })
                            .collect()
                    })
                    .collect(),
            },
            properties: Properties {
                building_id: e.building_id.clone(),
                damage_level: e.level,
                probs: e.probs,
                hazard_level: map.hazard_level,
                skipped: e.skipped,
            },
        })
        .collect();
    let doc = Collection {
        kind: "FeatureCollection".into(),
        scene_id: map.scene_id.clone(),
        disaster_type: map.disaster_type,
        hazard_level: map.hazard_level,
        palette_id: map.palette_id.clone(),
        features,
    };
    Ok(serde_json::to_string_pretty(&doc).expect("geojson serializes"))
}

/// Reads back the map written by [`to_geojson_with`]; geometry is checked
/// for shape only.
pub fn parse_geojson(text: &str) -> Result<DamageMap, MapError> {
    let doc: Collection = serde_json::from_str(text).map_err(|e| MapError::MalformedGeoJson(e.to_string()))?;
    if doc.kind != "FeatureCollection" {
        return Err(MapError::MalformedGeoJson(format!("expected FeatureCollection, got {}", doc.kind)));
    }
    let entries = doc
        .features
        .into_iter()
        .map(|f| {
            if f.kind != "Feature" || f.geometry.kind != "Polygon" || f.geometry.coordinates.is_empty() {
                return Err(MapError::MalformedGeoJson(format!(
                    "feature {} is not a polygon feature",
                    f.properties.building_id
                )));
            }
            Ok(MapEntry {
                building_id: f.properties.building_id,
                level: f.properties.damage_level,
                probs: f.properties.probs,
                skipped: f.properties.skipped,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(DamageMap {
        scene_id: doc.scene_id,
        disaster_type: doc.disaster_type,
        hazard_level: doc.hazard_level,
        palette_id: doc.palette_id,
        entries,
    })
}
