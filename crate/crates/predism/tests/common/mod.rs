//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use image::{Rgb, RgbImage};
use predism::config::AppConfig;
use predism::http::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

pub const CLASSES: [&str; 4] = ["no-damage", "minor-damage", "major-damage", "destroyed"];

pub struct SceneFixture {
    pub png: PathBuf,
    pub labels: PathBuf,
}

/// Cheap deterministic pixel noise.
fn noise(x: u32, y: u32, seed: u32) -> u8 {
    let mut h = x.wrapping_mul(0x9E37_79B1) ^ y.wrapping_mul(0x85EB_CA77) ^ seed.wrapping_mul(0xC2B2_AE3D);
    h ^= h >> 15;
    h = h.wrapping_mul(0x2C1B_3C6D);
    h ^= h >> 12;
    h as u8
}

/// Writes `<dir>/<id>.png`, its geo sidecar and `<dir>/<id>.json` with `n`
/// rectangular buildings on a 12-pixel grid. Roof brightness follows the
/// class so the data is learnable. `unclassified` marks every k-th building
/// as un-classified.
pub fn write_scene(dir: &Path, id: &str, kind: &str, n: usize, seed: u32, unclassified: Option<usize>) -> SceneFixture {
    fs::create_dir_all(dir).unwrap();
    let cols = 10usize;
    let rows = n.div_ceil(cols).max(1);
    let mut img = RgbImage::from_fn((cols * 12) as u32, (rows * 12) as u32, |x, y| {
        let v = noise(x, y, seed);
        Rgb([v, v.wrapping_add(40), v.wrapping_add(80)])
    });
    let mut features = Vec::new();
    for i in 0..n {
        let class = (i + seed as usize) % 4;
        let (gx, gy) = ((i % cols) * 12, (i / cols) * 12);
        let w = 4 + (noise(i as u32, 1, seed) % 6) as usize;
        let h = 4 + (noise(i as u32, 2, seed) % 6) as usize;
        let roof = 30 + 60 * class as u8;
        for y in gy + 1..gy + 1 + h {
            for x in gx + 1..gx + 1 + w {
                img.put_pixel(x as u32, y as u32, Rgb([roof; 3]));
            }
        }
        let (x0, y0, x1, y1) = (gx + 1, gy + 1, gx + 1 + w, gy + 1 + h);
        let subtype = match unclassified {
            Some(k) if i % k == k - 1 => "un-classified",
            _ => CLASSES[class],
        };
        features.push(json!({
            "wkt": format!("POLYGON (({x0} {y0}, {x1} {y0}, {x1} {y1}, {x0} {y1}, {x0} {y0}))"),
            "properties": { "subtype": subtype, "uid": format!("{id}-b{i:03}") },
        }));
    }
    let png = dir.join(format!("{id}.png"));
    img.save(&png).unwrap();
    fs::write(
        dir.join(format!("{id}.geo.json")),
        json!({"lat_min": 27.6, "lat_max": 27.7, "lng_min": 85.2, "lng_max": 85.3}).to_string(),
    )
    .unwrap();
    let labels = dir.join(format!("{id}.json"));
    let doc = json!({
        "metadata": { "event": "fixture-event", "disaster_type": kind, "scene_id": id, "hazard_level": 3 },
        "features": features,
    });
    fs::write(&labels, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    SceneFixture { png, labels }
}

/// An `events/` tree with two flood scenes and one fire scene.
pub fn write_events(root: &Path, unclassified: Option<usize>) {
    for (event, kind, scenes) in [("river-flood-2020", "flood", 2u32), ("hill-fire-2021", "wildfire", 1)] {
        let base = root.join("events").join(event);
        for s in 0..scenes {
            let id = format!("{event}-{s}");
            let f = write_scene(&base.join("images"), &id, kind, 40, s + 1, unclassified);
            fs::create_dir_all(base.join("labels")).unwrap();
            fs::rename(&f.labels, base.join("labels").join(format!("{id}.json"))).unwrap();
            let _ = fs::remove_file(base.join("images").join(format!("{id}.geo.json")));
        }
    }
}

pub fn test_config(artifacts: &Path) -> AppConfig {
    AppConfig {
        artifacts_dir: artifacts.to_path_buf(),
        ..AppConfig::default()
    }
}

pub fn app(cfg: AppConfig) -> axum::Router {
    router(Arc::new(AppState::new(cfg).unwrap()))
}

pub async fn send(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(v.to_string()),
            None => Body::empty(),
        })
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn send_json(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, b) = send(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

pub fn stub_backend() -> &'static str {
    env!("CARGO_BIN_EXE_predism-stub-backend")
}

pub fn predism_bin() -> &'static str {
    env!("CARGO_BIN_EXE_predism")
}

pub fn softmax(l: &[f64; 5]) -> [f64; 5] {
    let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = l.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    std::array::from_fn(|i| e[i] / s)
}
