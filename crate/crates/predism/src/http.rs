//! JSON-over-HTTP front end.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use base64::Engine;
use predism_core::damagemap::Predictor;
use predism_core::{GeoBounds, HazardAttributes, Scene, ThresholdTable, DISASTER_TYPES};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::config::AppConfig;
use crate::error::AppError;
use crate::jobs::{digest_hex, JobStore};
use crate::pipeline::{self, SweepManifest};

pub struct AppState {
    pub config: AppConfig,
    pub predictor: Predictor,
    pub thresholds: ThresholdTable,
    pub jobs: JobStore,
}

impl AppState {
    /// Resolves backends and thresholds; fails if any backend cannot start.
    pub fn new(config: AppConfig) -> Result<Self, AppError> {
        config.validate()?;
        let predictor = config.predictor()?;
        let thresholds = config.threshold_table()?;
        let jobs = JobStore::new(config.artifacts_dir.clone());
        Ok(AppState {
            config,
            predictor,
            thresholds,
            jobs,
        })
    }
}

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            log::error!("{self}");
        }
        json_response(status, serde_json::to_vec(&self.body()).expect("error body serializes"))
    }
}

fn json_response(status: StatusCode, body: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn ok_json<T: Serialize>(value: &T) -> Response {
    json_response(StatusCode::OK, serde_json::to_vec(value).expect("response serializes"))
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, AppError> {
    serde_json::from_slice(body).map_err(|e| AppError::malformed(format!("request body: {e}")))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, AppError> + Send + 'static,
) -> Result<T, AppError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| AppError::internal(format!("worker panicked: {e}")))?
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/config", get(config_view))
        .route("/hazard-score", post(hazard_score))
        .route("/predict", post(predict))
        .route("/sweep", post(sweep))
        .route("/jobs/{id}", get(job))
        .route("/artifacts/{*path}", get(artifact))
        .fallback(|| async { AppError::not_found("no such route") })
        .with_state(state)
}

#[derive(Serialize)]
struct BackboneInfo {
    disaster_type: String,
    kind: String,
}

async fn health(State(s): State<Arc<AppState>>) -> Response {
    let backbones: Vec<BackboneInfo> = s
        .predictor
        .registry
        .backbones()
        .map(|(t, b)| BackboneInfo {
            disaster_type: t.to_string(),
            kind: b.kind().to_string(),
        })
        .collect();
    ok_json(&serde_json::json!({ "status": "ok", "backbones": backbones }))
}

async fn config_view(State(s): State<Arc<AppState>>) -> Response {
    let c = &s.config;
    let backends: BTreeMap<String, String> = s
        .predictor
        .registry
        .backbones()
        .map(|(t, b)| (t.to_string(), b.kind().to_string()))
        .collect();
    ok_json(&serde_json::json!({
        "chip_size": c.chip_size,
        "tau": c.tau,
        "palette": c.palette,
        "thresholds": s.thresholds.to_json(),
        "disaster_types": DISASTER_TYPES.iter().map(|t| t.as_str()).collect::<Vec<_>>(),
        "backends": backends,
        "co_occurrence": s.predictor.registry.co_occurrence(),
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HazardScoreRequest {
    attrs: BTreeMap<String, f64>,
}

async fn hazard_score(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Response, AppError> {
    let req: HazardScoreRequest = parse_body(&body)?;
    let attrs = pipeline::attributes_from_map(&req.attrs)?;
    Ok(ok_json(&pipeline::hazard_score(&attrs, &s.thresholds)?))
}

/// Scene and labels for predict and sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_path: Option<PathBuf>,
    /// Id for inline scenes; defaults to the label metadata's scene id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_id: Option<String>,
    /// A label document, inline or as a JSON string.
    pub labels: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disaster_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hazard_level: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attrs: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geo_bounds: Option<GeoBounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<i64>>,
}

struct Resolved {
    scene: Scene,
    footprints: Vec<predism_core::Footprint>,
    disaster_type: predism_core::DisasterType,
    labels: predism_core::dataset::LabelDocument,
    attrs: Option<HazardAttributes>,
}

fn resolve(config: &AppConfig, req: &SceneRequest) -> Result<Resolved, AppError> {
    let labels = match &req.labels {
        serde_json::Value::String(s) => pipeline::parse_labels(s)?,
        v => predism_core::dataset::LabelDocument::parse(&v.to_string())?,
    };
    let scene = match (&req.scene_b64, &req.scene_path) {
        (Some(b64), None) => {
            let bytes = base64::engine::general_purpose::STANDARD
                .decode(b64.trim())
                .map_err(|e| AppError::malformed(format!("scene_b64: {e}")))?;
            let id = req.scene_id.clone().unwrap_or_else(|| labels.metadata.scene_id.clone());
            Scene::from_png_bytes(id, &bytes, req.geo_bounds)?
        }
        (None, Some(path)) => {
            let path = match &config.data_root {
                Some(root) => pipeline::confine(root, path)?,
                None => path.clone(),
            };
            pipeline::load_scene(&path, req.geo_bounds)?
        }
        _ => return Err(AppError::malformed("give exactly one of scene_b64 or scene_path")),
    };
    if let Some(b) = &scene.geo_bounds {
        b.validate()?;
    }
    let footprints = labels.footprints()?;
    let disaster_type = pipeline::resolve_type(req.disaster_type.as_deref(), &labels)?;
    let attrs = req.attrs.as_ref().map(pipeline::attributes_from_map).transpose()?;
    Ok(Resolved {
        scene,
        footprints,
        disaster_type,
        labels,
        attrs,
    })
}

async fn predict(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Response, AppError> {
    let req: SceneRequest = parse_body(&body)?;
    if req.levels.is_some() {
        return Err(AppError::malformed("levels belong to /sweep"));
    }
    let map = blocking(move || {
        let r = resolve(&s.config, &req)?;
        let hazard = pipeline::resolve_hazard(req.hazard_level, r.attrs.clone(), Some(&r.labels))?;
        Ok(s.predictor
            .predict_scene(&r.scene, &r.footprints, r.disaster_type, &hazard)?)
    })
    .await?;
    Ok(ok_json(&map))
}

#[derive(Serialize)]
struct SweepResponse {
    job_id: String,
    manifest: SweepManifest,
    /// GeoJSON documents exactly as written to disk.
    maps: Vec<Box<RawValue>>,
    renders: Vec<String>,
}

async fn sweep(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Response, AppError> {
    let req: SceneRequest = parse_body(&body)?;
    let levels = pipeline::parse_levels(req.levels.as_deref().unwrap_or_default())?;
    let resp = blocking(move || {
        let r = resolve(&s.config, &req)?;
        // The digest covers the resolved request and the effective config.
        let digest = digest_hex(
            format!(
                "{}\n{}",
                serde_json::to_string(&req).expect("request serializes"),
                serde_json::to_string(&s.config).expect("config serializes")
            )
            .as_bytes(),
        );
        let (record, _) = s.jobs.run(&digest, |dir| {
            let (manifest, _) = pipeline::write_sweep(
                &s.predictor,
                &s.config.palette,
                &r.scene,
                &r.footprints,
                r.disaster_type,
                r.attrs.as_ref(),
                &levels,
                dir,
            )?;
            let mut files: Vec<String> = manifest.maps.iter().chain(&manifest.renders).cloned().collect();
            files.push(pipeline::MANIFEST_FILE.into());
            Ok((files, ()))
        })?;
        let dir = s.jobs.job_dir(&record.job_id);
        let manifest_path = dir.join(pipeline::MANIFEST_FILE);
        let manifest: SweepManifest = serde_json::from_slice(
            &std::fs::read(&manifest_path).map_err(|e| pipeline::io_error(&manifest_path, e))?,
        )
        .map_err(|e| AppError::internal(format!("manifest: {e}")))?;
        let maps = manifest
            .maps
            .iter()
            .map(|m| {
                let p = dir.join(m);
                let text = std::fs::read_to_string(&p).map_err(|e| pipeline::io_error(&p, e))?;
                RawValue::from_string(text).map_err(|e| AppError::internal(format!("{m}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let renders = manifest
            .renders
            .iter()
            .map(|f| format!("/artifacts/{}/{f}", record.job_id))
            .collect();
        Ok(SweepResponse {
            job_id: record.job_id,
            manifest,
            maps,
            renders,
        })
    })
    .await?;
    Ok(ok_json(&resp))
}

async fn job(State(s): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, AppError> {
    let rec = s
        .jobs
        .get(&id)
        .ok_or_else(|| AppError::not_found(format!("no job {id}")))?;
    Ok(ok_json(&rec))
}

async fn artifact(State(s): State<Arc<AppState>>, UrlPath(path): UrlPath<String>) -> Result<Response, AppError> {
    let full = pipeline::confine(s.jobs.root(), std::path::Path::new(&path))?;
    let ctype = match full.extension().and_then(|e| e.to_str()) {
        Some("png") => "image/png",
        Some("geojson") => "application/geo+json",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    };
    let bytes = blocking(move || Ok(std::fs::read(&full)))
        .await?
        .map_err(|_| AppError::not_found(format!("no artifact {path}")))?;
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, ctype)], bytes).into_response())
}

/// Binds `addr` and serves until interrupted.
pub async fn serve(state: AppState) -> Result<(), AppError> {
    let addr = state.config.listen.clone();
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| AppError::new(crate::error::ErrorKind::Startup, "PortUnavailable", format!("{addr}: {e}")))?;
    log::info!("listening on {addr}");
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| AppError::internal(e.to_string()))
}
