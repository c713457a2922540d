use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::disaster::DisasterType;
use crate::error::DatasetError;
use crate::hazard::{HazardAttributes, HazardLevel};
use crate::rastergeom::sidecar_path;

use super::{DamageClass, LabelDocument, LabeledBuilding};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub scene_id: String,
    pub image_path: PathBuf,
    pub label_path: PathBuf,
    pub geo_path: Option<PathBuf>,
    pub hazard_level: Option<HazardLevel>,
    pub hazard: Option<HazardAttributes>,
    pub buildings: Vec<LabeledBuilding>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub event_id: String,
    pub disaster_type: DisasterType,
    pub scenes: Vec<SceneRecord>,
}

impl Event {
    pub fn building_count(&self) -> usize {
        self.scenes.iter().map(|s| s.buildings.len()).sum()
    }
}

/// Events grouped by disaster type, everything in lexicographic order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventCatalog {
    groups: BTreeMap<DisasterType, Vec<Event>>,
}

/// Borrowed view of one labeled building and the scene it sits in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRef<'a> {
    pub scene: &'a SceneRecord,
    pub building: &'a LabeledBuilding,
}

#[derive(Debug, Clone, Serialize)]
pub struct EventSummary {
    pub event_id: String,
    pub disaster_type: DisasterType,
    pub scenes: usize,
    pub buildings: usize,
    pub by_class: BTreeMap<String, usize>,
}

impl EventCatalog {
    /// Builds a catalog from already-grouped events; fails on duplicate
    /// event ids or events that mix types.
    pub fn from_events(events: Vec<Event>) -> Result<Self, DatasetError> {
        let mut groups: BTreeMap<DisasterType, Vec<Event>> = BTreeMap::new();
        let mut seen = std::collections::BTreeSet::new();
        for ev in events {
            if !seen.insert(ev.event_id.clone()) {
                return Err(DatasetError::MalformedLabelFile(format!(
                    "duplicate event id {}",
                    ev.event_id
                )));
            }
            for b in ev.scenes.iter().flat_map(|s| &s.buildings) {
                if b.disaster_type != ev.disaster_type {
                    return Err(DatasetError::MixedDisasterTypesInEvent {
                        event: ev.event_id.clone(),
                        first: ev.disaster_type,
                        second: b.disaster_type,
                    });
                }
            }
            groups.entry(ev.disaster_type).or_default().push(ev);
        }
        for evs in groups.values_mut() {
            evs.sort_by(|a, b| a.event_id.cmp(&b.event_id));
            for ev in evs.iter_mut() {
                ev.scenes.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
            }
        }
        let cat = EventCatalog { groups };
        if cat.building_count() == 0 {
            return Err(DatasetError::EmptyCatalog);
        }
        Ok(cat)
    }

    pub fn groups(&self) -> &BTreeMap<DisasterType, Vec<Event>> {
        &self.groups
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.groups.values().flatten()
    }

    pub fn samples(&self) -> impl Iterator<Item = SampleRef<'_>> {
        self.events()
            .flat_map(|e| &e.scenes)
            .flat_map(|scene| scene.buildings.iter().map(move |building| SampleRef { scene, building }))
    }

    pub fn building_count(&self) -> usize {
        self.events().map(Event::building_count).sum()
    }

    pub fn summary(&self) -> Vec<EventSummary> {
        self.events()
            .map(|e| {
                let mut by_class = BTreeMap::new();
                for b in e.scenes.iter().flat_map(|s| &s.buildings) {
                    *by_class.entry(b.damage.to_string()).or_insert(0) += 1;
                }
                EventSummary {
                    event_id: e.event_id.clone(),
                    disaster_type: e.disaster_type,
                    scenes: e.scenes.len(),
                    buildings: e.building_count(),
                    by_class,
                }
            })
            .collect()
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let rd = std::fs::read_dir(dir).map_err(|source| DatasetError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|source| DatasetError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        out.push(entry.path());
    }
    out.sort();
    Ok(out)
}

fn load_scene(event_dir: &Path, event_id: &str, label_path: PathBuf) -> Result<SceneRecord, DatasetError> {
    let text = std::fs::read_to_string(&label_path).map_err(|source| DatasetError::Io {
        path: label_path.clone(),
        source,
    })?;
    let doc = LabelDocument::parse(&text)
        .map_err(|e| DatasetError::MalformedLabelFile(format!("{}: {e}", label_path.display())))?;
    let mut buildings = doc.buildings()?;
    for b in &mut buildings {
        b.event_id = event_id.to_string();
    }
    let stem = label_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let image_path = event_dir.join("images").join(format!("{stem}.png"));
    if !image_path.is_file() {
        return Err(DatasetError::Io {
            path: image_path,
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "scene image missing"),
        });
    }
    let geo = sidecar_path(&image_path);
    Ok(SceneRecord {
        scene_id: doc.metadata.scene_id.clone(),
        geo_path: geo.is_file().then_some(geo),
        image_path,
        label_path,
        hazard_level: doc.metadata.hazard_level,
        hazard: doc.metadata.hazard.clone(),
        buildings,
    })
}

/// Reads `root/events/<event_id>/{images/*.png, labels/*.json}`. The event
/// directory name is the event id.
pub fn build_catalog(root: &Path) -> Result<EventCatalog, DatasetError> {
    let events_dir = root.join("events");
    if !events_dir.is_dir() {
        return Err(DatasetError::EmptyCatalog);
    }
    let mut events = Vec::new();
    for event_dir in sorted_entries(&events_dir)?.into_iter().filter(|p| p.is_dir()) {
        let event_id = event_dir
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let labels_dir = event_dir.join("labels");
        if !labels_dir.is_dir() {
            continue;
        }
        let label_paths: Vec<PathBuf> = sorted_entries(&labels_dir)?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        let scenes: Vec<SceneRecord> = label_paths
            .into_par_iter()
            .map(|p| load_scene(&event_dir, &event_id, p))
            .collect::<Result<_, _>>()?;
        let Some(first) = scenes.iter().flat_map(|s| &s.buildings).next() else {
            continue;
        };
        let disaster_type = first.disaster_type;
        events.push(Event {
            event_id,
            disaster_type,
            scenes,
        });
    }
    EventCatalog::from_events(events)
}

/// Building-level split stratified by disaster type. Unclassified buildings
/// are excluded from both sides.
pub fn split(
    catalog: &EventCatalog,
    ratio: f64,
    seed: u64,
) -> Result<(Vec<SampleRef<'_>>, Vec<SampleRef<'_>>), DatasetError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DatasetError::InvalidRatio(ratio));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut validation = Vec::new();
    let mut any = false;
    for (ty, events) in catalog.groups() {
        let stratum: Vec<SampleRef<'_>> = events
            .iter()
            .flat_map(|e| &e.scenes)
            .flat_map(|scene| scene.buildings.iter().map(move |building| SampleRef { scene, building }))
            .filter(|s| s.building.damage != DamageClass::Unclassified)
            .collect();
        if stratum.is_empty() {
            continue;
        }
        any = true;
        let n = stratum.len();
        if n < 2 {
            return Err(DatasetError::InsufficientData {
                stratum: ty.to_string(),
                count: n,
            });
        }
        let n_train = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let mut is_train = vec![false; n];
        for &i in &idx[..n_train] {
            is_train[i] = true;
        }
        for (s, t) in stratum.into_iter().zip(is_train) {
            if t {
                train.push(s);
            } else {
                validation.push(s);
            }
        }
    }
    if !any {
        return Err(DatasetError::InsufficientData {
            stratum: "all".into(),
            count: 0,
        });
    }
    Ok((train, validation))
}
