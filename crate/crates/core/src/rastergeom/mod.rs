//! Scenes, footprint geometry, rasterization and one-building chips.

mod chip;
mod raster;
mod wkt;

use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, RasterError};

pub use chip::{chip_set, extract_chip, resample_bilinear, Chip, ChipSet, SkippedFootprint, DEFAULT_CHIP_SIZE};
pub use raster::{rasterize, BitMask};
pub use wkt::{parse_wkt, to_wkt};


/// Geographic extent of a scene in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBounds {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lng_min: f64,
    pub lng_max: f64,
}

impl GeoBounds {
    pub fn validate(&self) -> Result<(), RasterError> {
        let finite = [self.lat_min, self.lat_max, self.lng_min, self.lng_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.lat_min >= self.lat_max || self.lng_min >= self.lng_max {
            return Err(RasterError::InvalidScene(format!(
                "geo bounds need lat_min < lat_max and lng_min < lng_max, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Linear pixel to `(lng, lat)`; pixel row 0 is the northern edge.
    pub fn pixel_to_lng_lat(&self, x: f64, y: f64, width: usize, height: usize) -> (f64, f64) {
        let lng = self.lng_min + x / width as f64 * (self.lng_max - self.lng_min);
        let lat = self.lat_max - y / height as f64 * (self.lat_max - self.lat_min);
        (lng, lat)
    }
}

/// A pre-disaster RGB scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scene_id: String,
    pub pixels: RgbImage,
    pub geo_bounds: Option<GeoBounds>,
}

impl Scene {
    pub fn new(
        scene_id: impl Into<String>,
        pixels: RgbImage,
        geo_bounds: Option<GeoBounds>,
    ) -> Result<Self, RasterError> {
        if pixels.width() == 0 || pixels.height() == 0 {
            return Err(RasterError::InvalidScene("scene must be at least 1x1".into()));
        }
        if let Some(b) = &geo_bounds {
            b.validate()?;
        }
        Ok(Scene {
            scene_id: scene_id.into(),
            pixels,
            geo_bounds,
        })
    }

    pub fn width(&self) -> usize {
        self.pixels.width() as usize
    }

    pub fn height(&self) -> usize {
        self.pixels.height() as usize
    }

    /// Decodes PNG bytes (any color type is converted to 8-bit RGB).
    pub fn from_png_bytes(
        scene_id: impl Into<String>,
        bytes: &[u8],
        geo_bounds: Option<GeoBounds>,
    ) -> Result<Self, RasterError> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
        Scene::new(scene_id, img.to_rgb8(), geo_bounds)
    }

    /// Loads `<dir>/<stem>.png` and, when present, `<dir>/<stem>.geo.json`.
    /// The scene id is the file stem.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("scene")
            .to_string();
        let sidecar = sidecar_path(path);
        let bounds = if sidecar.exists() {
            let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
            let b: GeoBounds = serde_json::from_str(&text).map_err(|e| {
                RasterError::InvalidScene(format!("{}: {e}", sidecar.display()))
            })?;
            Some(b)
        } else {
            None
        };
        Ok(Scene::from_png_bytes(stem, &bytes, bounds)?)
    }
}

/// `<dir>/<stem>.geo.json` next to a scene image.
pub fn sidecar_path(image: &Path) -> PathBuf {
    let stem = image.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
    image.with_file_name(format!("{stem}.geo.json"))
}

/// A building outline in scene pixel coordinates: outer ring first, then
/// holes. Every ring is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub building_id: String,
    pub rings: Vec<Vec<(f64, f64)>>,
}

impl Footprint {
    pub fn parse(building_id: impl Into<String>, wkt: &str) -> Result<Self, RasterError> {
        parse_wkt(building_id, wkt)
    }

    pub fn to_wkt(&self) -> String {
        to_wkt(self)
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rect(building_id: impl Into<String>, x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Footprint {
            building_id: building_id.into(),
            rings: vec![vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]],
        }
    }

    pub fn rasterize(&self, width: usize, height: usize) -> BitMask {
        rasterize(self, width, height)
    }
}
