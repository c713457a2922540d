use std::fmt;
use std::str::FromStr;

use image::{ImageEncoder, Rgb, RgbImage};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ensemble::DamageLevel;
use crate::error::MapError;
use crate::rastergeom::{rasterize, Footprint, Scene};

use super::DamageMap;

/// 24-bit color written as `#RRGGBB`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Color(pub [u8; 3]);

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b] = self.0;
        write!(f, "#{r:02X}{g:02X}{b:02X}")
    }
}

impl FromStr for Color {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.strip_prefix('#').unwrap_or(s);
        if hex.len() != 6 || !hex.is_ascii() {
            return Err(format!("invalid color {s:?}, expected #RRGGBB"));
        }
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| format!("invalid color {s:?}"));
        Ok(Color([byte(0)?, byte(2)?, byte(4)?]))
    }
}

impl Serialize for Color {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Color {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub id: String,
    /// Fill for damage levels 1 to 5.
    pub levels: [Color; 5],
    pub unclassified: Color,
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            id: "default".into(),
            levels: [
                Color([0x2E, 0xCC, 0x71]),
                Color([0xF1, 0xC4, 0x0F]),
                Color([0xE6, 0x7E, 0x22]),
                Color([0xE7, 0x4C, 0x3C]),
                Color([0x8E, 0x44, 0xAD]),
            ],
            unclassified: Color([0x95, 0xA5, 0xA6]),
        }
    }
}

impl Palette {
    pub fn color(&self, level: DamageLevel) -> Color {
        match level {
            DamageLevel::Level(l) => self.levels[usize::from(l.clamp(1, 5)) - 1],
            DamageLevel::Unclassified => self.unclassified,
        }
    }
}

/// Integer Rec. 601 gray, rounded.
fn gray(p: [u8; 3]) -> u8 {
    let v = (299 * u32::from(p[0]) + 587 * u32::from(p[1]) + 114 * u32::from(p[2]) + 500) / 1000;
    v as u8
}

/// Grayscale scene with building pixels filled by level color. Footprints are
/// painted in input order, so later ones win on overlap.
pub fn render(map: &DamageMap, scene: &Scene, footprints: &[Footprint], palette: &Palette) -> Result<RgbImage, MapError> {
    map.check_footprints(footprints)?;
    let mut out = RgbImage::from_fn(scene.pixels.width(), scene.pixels.height(), |x, y| {
        let g = gray(scene.pixels.get_pixel(x, y).0);
        Rgb([g, g, g])
    });
    for (entry, fp) in map.entries.iter().zip(footprints) {
        let color = Rgb(palette.color(entry.level).0);
        for (x, y) in rasterize(fp, scene.width(), scene.height()).iter_ones() {
            out.put_pixel(x as u32, y as u32, color);
        }
    }
    Ok(out)
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut buf = Vec::new();
    image::codecs::png::PngEncoder::new(&mut buf)
        .write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)
        .expect("in-memory PNG encoding");
    buf
}

/// [`render`] encoded as PNG bytes.
pub fn render_png(map: &DamageMap, scene: &Scene, footprints: &[Footprint], palette: &Palette) -> Result<Vec<u8>, MapError> {
    Ok(encode_png(&render(map, scene, footprints, palette)?))
}
