//! Input resolution and artifact writing shared by the CLI and the service,
//! so both paths produce the same bytes for the same inputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use predism_core::damagemap::{render_png, to_geojson, HazardInput, Predictor};
use predism_core::dataset::{build_catalog, class_to_level, split, EventCatalog, LabelDocument, SampleRef, SceneRecord};
use predism_core::ensemble::{
    extract_features, head_input, meta_vector, train, EpochRecord, ModelFile,
};
use predism_core::error::{EnsembleError, HazardError, MapError};
use predism_core::hazard::{attribute_levels, overall_level, AttributeLevels, HazardAttribute};
use predism_core::rastergeom::chip_set;
use predism_core::{
    DamageMap, DisasterType, Footprint, GeoBounds, Head, HazardAttributes, HazardLevel, Palette, Scene, ThresholdTable,
    TrainConfig, TrainingSample,
};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

/// Hazard level used for labelled scenes that carry no hazard description.
pub const DEFAULT_TRAINING_HAZARD: u8 = 3;

pub fn load_scene(path: &Path, bounds: Option<GeoBounds>) -> Result<Scene, AppError> {
    let mut scene = Scene::load(path)?;
    if bounds.is_some() {
        scene.geo_bounds = bounds;
    }
    if let Some(b) = &scene.geo_bounds {
        b.validate()?;
    }
    Ok(scene)
}

pub fn parse_labels(text: &str) -> Result<LabelDocument, AppError> {
    Ok(LabelDocument::parse(text)?)
}

pub fn read_labels(path: &Path) -> Result<LabelDocument, AppError> {
    let text = fs::read_to_string(path).map_err(|e| predism_core::Error::io(path, e))?;
    parse_labels(&text)
}

/// Explicit type wins; otherwise the label file's metadata decides.
pub fn resolve_type(explicit: Option<&str>, labels: &LabelDocument) -> Result<DisasterType, AppError> {
    match explicit {
        Some(name) => name
            .parse()
            .map_err(|_| EnsembleError::UnknownDisasterType(name.to_string()).into()),
        None => Ok(labels.disaster_type()?),
    }
}

/// Builds attributes from `name -> value` pairs, rejecting unknown names.
pub fn attributes_from_map(values: &BTreeMap<String, f64>) -> Result<HazardAttributes, AppError> {
    let mut attrs = HazardAttributes::default();
    for (name, &v) in values {
        let kind: HazardAttribute = name.parse()?;
        attrs.set(kind, Some(v));
    }
    Ok(attrs)
}

/// Explicit level, then explicit attributes, then whatever the label file
/// metadata provides.
pub fn resolve_hazard(
    level: Option<i64>,
    attrs: Option<HazardAttributes>,
    labels: Option<&LabelDocument>,
) -> Result<HazardInput, AppError> {
    if let Some(l) = level {
        return Ok(HazardInput::Level(HazardLevel::new(l)?));
    }
    if let Some(a) = attrs.filter(|a| !a.is_empty()) {
        return Ok(HazardInput::Attributes(a));
    }
    if let Some(meta) = labels.map(|d| &d.metadata) {
        if let Some(l) = meta.hazard_level {
            return Ok(HazardInput::Level(l));
        }
        if let Some(a) = meta.hazard.clone().filter(|a| !a.is_empty()) {
            return Ok(HazardInput::Attributes(a));
        }
    }
    Err(HazardError::NoAttributes.into())
}

pub fn parse_levels(levels: &[i64]) -> Result<Vec<HazardLevel>, AppError> {
    if levels.is_empty() {
        return Err(MapError::InvalidLevels.into());
    }
    levels
        .iter()
        .map(|&l| HazardLevel::new(l).map_err(|_| MapError::InvalidLevels.into()))
        .collect()
}

/// Per-attribute and overall levels for the hazard-score operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardScore {
    pub per_attribute_levels: BTreeMap<String, HazardLevel>,
    pub overall: HazardLevel,
}

pub fn hazard_score(attrs: &HazardAttributes, table: &ThresholdTable) -> Result<HazardScore, AppError> {
    let levels = attribute_levels(attrs, table)?;
    let overall = overall_level(attrs, table)?;
    let per_attribute_levels = attrs
        .present()
        .map(|(k, _)| (k.as_str().to_string(), levels[k.index()].expect("scored")))
        .collect();
    Ok(HazardScore {
        per_attribute_levels,
        overall,
    })
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Artifact listing written next to sweep outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub scene_id: String,
    pub disaster_type: DisasterType,
    pub palette_id: String,
    pub hazard_levels: Vec<HazardLevel>,
    /// GeoJSON file names, one per level, relative to the manifest.
    pub maps: Vec<String>,
    /// PNG file names, one per level, relative to the manifest.
    pub renders: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn geojson_name(level: HazardLevel) -> String {
    format!("level-{}.geojson", level.get())
}

pub fn render_name(level: HazardLevel) -> String {
    format!("level-{}.png", level.get())
}

/// Runs a sweep and writes one GeoJSON and one PNG per level plus the
/// manifest into `out_dir`. Nothing is written unless every map succeeds.
#[allow(clippy::too_many_arguments)]
pub fn write_sweep(
    predictor: &Predictor,
    palette: &Palette,
    scene: &Scene,
    footprints: &[Footprint],
    disaster_type: DisasterType,
    attrs: Option<&HazardAttributes>,
    levels: &[HazardLevel],
    out_dir: &Path,
) -> Result<(SweepManifest, Vec<DamageMap>), AppError> {
    if scene.geo_bounds.is_none() {
        return Err(MapError::MissingGeoBounds.into());
    }
    let maps = predictor.sweep(scene, footprints, disaster_type, attrs, levels)?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut manifest = SweepManifest {
        scene_id: scene.scene_id.clone(),
        disaster_type,
        palette_id: palette.id.clone(),
        hazard_levels: levels.to_vec(),
        maps: Vec::new(),
        renders: Vec::new(),
    };
    for map in &maps {
        let g = geojson_name(map.hazard_level);
        let r = render_name(map.hazard_level);
        files.push((g.clone(), to_geojson(map, footprints, scene)?.into_bytes()));
        files.push((r.clone(), render_png(map, scene, footprints, palette)?));
        manifest.maps.push(g);
        manifest.renders.push(r);
    }
    files.push((MANIFEST_FILE.into(), to_pretty_json(&manifest).into_bytes()));
    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    for (name, bytes) in files {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
    }
    Ok((manifest, maps))
}

pub fn io_error(path: &Path, e: std::io::Error) -> AppError {
    AppError::from(predism_core::Error::io(path, e))
}

/// Meta inputs of a labelled scene.
fn scene_hazard(record: &SceneRecord, table: &ThresholdTable) -> Result<(HazardLevel, AttributeLevels), AppError> {
    let attrs = record.hazard.clone().unwrap_or_default();
    let attr_levels = attribute_levels(&attrs, table)?;
    let overall = match (record.hazard_level, attrs.is_empty()) {
        (Some(l), _) => l,
        (None, false) => overall_level(&attrs, table)?,
        (None, true) => HazardLevel::new(i64::from(DEFAULT_TRAINING_HAZARD))?,
    };
    Ok((overall, attr_levels))
}

/// Training samples for the given buildings, grouped by disaster type.
/// Each scene image is decoded once. Footprints that cover no pixel are
/// skipped.
pub fn samples_by_type(
    refs: &[SampleRef<'_>],
    chip_size: usize,
    table: &ThresholdTable,
) -> Result<BTreeMap<DisasterType, Vec<TrainingSample>>, AppError> {
    let mut by_scene: BTreeMap<&Path, (&SceneRecord, Vec<&predism_core::LabeledBuilding>)> = BTreeMap::new();
    for r in refs {
        by_scene
            .entry(r.scene.image_path.as_path())
            .or_insert_with(|| (r.scene, Vec::new()))
            .1
            .push(r.building);
    }
    let mut out: BTreeMap<DisasterType, Vec<TrainingSample>> = BTreeMap::new();
    for (path, (record, buildings)) in by_scene {
        let scene = Scene::load(path)?;
        let footprints: Vec<Footprint> = buildings.iter().map(|b| b.footprint.clone()).collect();
        let chips = match chip_set(&scene, &footprints, chip_size) {
            Ok(c) => c,
            Err(predism_core::error::RasterError::NoValidFootprints) => {
                log::warn!("scene {}: no footprint covers a pixel", record.scene_id);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let (overall, attr_levels) = scene_hazard(record, table)?;
        let skipped: Vec<usize> = chips.skipped.iter().map(|s| s.index).collect();
        let kept = buildings
            .iter()
            .enumerate()
            .filter(|(i, _)| !skipped.contains(i))
            .map(|(_, b)| b);
        for (b, chip) in kept.zip(&chips.chips) {
            let features = extract_features::<f64>(chip);
            let meta = meta_vector::<f64>(b.disaster_type, overall, &attr_levels);
            out.entry(b.disaster_type).or_default().push(TrainingSample {
                input: head_input(&features, &meta),
                level: class_to_level(b.damage)?,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    Ordinal,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeReport {
    pub train_samples: usize,
    pub validation_samples: usize,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub types: BTreeMap<DisasterType, TypeReport>,
    /// Types left untrained because their data has a single label.
    pub skipped: Vec<DisasterType>,
}

pub struct TrainArtifacts {
    pub model: ModelFile,
    pub report: TrainReport,
    pub history: BTreeMap<DisasterType, Vec<EpochRecord>>,
}

/// One head per disaster type on a stratified split of the catalog.
pub fn train_catalog(
    catalog: &EventCatalog,
    kind: HeadKind,
    cfg: &TrainConfig,
    ratio: f64,
    chip_size: usize,
    table: &ThresholdTable,
) -> Result<TrainArtifacts, AppError> {
    let (train_refs, val_refs) = split(catalog, ratio, cfg.seed)?;
    let train_sets = samples_by_type(&train_refs, chip_size, table)?;
    let val_sets = samples_by_type(&val_refs, chip_size, table)?;
    let mut heads = BTreeMap::new();
    let mut history = BTreeMap::new();
    let mut report = TrainReport {
        types: BTreeMap::new(),
        skipped: Vec::new(),
    };
    for (t, data) in &train_sets {
        let head = match kind {
            HeadKind::Ordinal => Head::Ordinal(predism_core::OrdinalHead::zeroed()),
            HeadKind::Softmax => Head::Softmax(predism_core::SoftmaxHead::zeroed()),
        };
        let out = match train(head, data, cfg) {
            Ok(o) => o,
            Err(EnsembleError::DegenerateDataset) => {
                log::warn!("{t}: fewer than two distinct labels, keeping the untrained head");
                report.skipped.push(*t);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let acc = |d: &[TrainingSample]| predism_core::ensemble::accuracy(out.head.as_trainable(), d);
        let val = val_sets.get(t).map(Vec::as_slice).unwrap_or_default();
        report.types.insert(
            *t,
            TypeReport {
                train_samples: data.len(),
                validation_samples: val.len(),
                train_accuracy: acc(data),
                validation_accuracy: (!val.is_empty()).then(|| acc(val)),
            },
        );
        history.insert(*t, out.history);
        heads.insert(*t, out.head);
    }
    if heads.is_empty() {
        return Err(EnsembleError::DegenerateDataset.into());
    }
    let mut model = ModelFile::new(heads);
    model.train_config = Some(cfg.clone());
    model.history = history.clone();
    Ok(TrainArtifacts { model, report, history })
}

pub fn load_catalog(root: &Path) -> Result<EventCatalog, AppError> {
    Ok(build_catalog(root)?)
}

/// Resolves `path` against `root`, refusing anything that leaves it.
pub fn confine(root: &Path, path: &Path) -> Result<PathBuf, AppError> {
    use std::path::Component;
    if path.components().any(|c| matches!(c, Component::ParentDir)) {
        return Err(AppError::malformed("paths may not contain '..'"));
    }
    let joined = if path.is_absolute() { path.to_path_buf() } else { root.join(path) };
    if !joined.starts_with(root) {
        return Err(AppError::malformed(format!("{} is outside {}", path.display(), root.display())));
    }
    Ok(joined)
}
