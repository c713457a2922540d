use image::{GrayImage, RgbImage};
use rayon::prelude::*;

use crate::error::RasterError;

use super::{rasterize, BitMask, Footprint, Scene};

pub const DEFAULT_CHIP_SIZE: usize = 64;

/// A square, single-building image with everything outside the footprint
/// zeroed. `mask` is the footprint coverage resampled the same way as the
/// pixels (255 = fully inside).
#[derive(Debug, Clone, PartialEq)]
pub struct Chip {
    pub building_id: String,
    pub scene_id: String,
    pub pixels: RgbImage,
    pub mask: GrayImage,
    /// Set pixels of the source mask over scene area.
    pub area_fraction: f64,
    pub mask_area: u64,
    pub mask_perimeter: u64,
}

impl Chip {
    pub fn size(&self) -> usize {
        self.pixels.width() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedFootprint {
    pub index: usize,
    pub building_id: String,
}

/// One chip per footprint with a non-empty mask, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipSet {
    pub chips: Vec<Chip>,
    pub skipped: Vec<SkippedFootprint>,
}

impl ChipSet {
    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }
}

/// Bilinear resize of a square `side` x `side` interleaved buffer to
/// `out` x `out`. Sample positions use pixel-center alignment and clamp at the
/// border; results are rounded to nearest.
pub fn resample_bilinear(src: &[u8], side: usize, channels: usize, out: usize) -> Vec<u8> {
    assert_eq!(src.len(), side * side * channels);
    let scale = side as f64 / out as f64;
    let max = (side - 1) as f64;
    let taps: Vec<(usize, usize, f64)> = (0..out)
        .map(|o| {
            let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(side - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect();

    let mut dst = vec![0u8; out * out * channels];
    for (oy, &(y0, y1, fy)) in taps.iter().enumerate() {
        for (ox, &(x0, x1, fx)) in taps.iter().enumerate() {
            for c in 0..channels {
                let at = |x: usize, y: usize| f64::from(src[(y * side + x) * channels + c]);
                let top = (1.0 - fx) * at(x0, y0) + fx * at(x1, y0);
                let bottom = (1.0 - fx) * at(x0, y1) + fx * at(x1, y1);
                let v = (1.0 - fy) * top + fy * bottom;
                dst[(oy * out + ox) * channels + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    dst
}

/// Zeroes off-mask pixels, crops to the mask bounding box, pads to a square
/// (content centered), and resamples to `out_size` x `out_size`.
pub fn extract_chip(
    scene: &Scene,
    mask: &BitMask,
    out_size: usize,
    building_id: &str,
) -> Result<Chip, RasterError> {
    if out_size < 8 {
        return Err(RasterError::InvalidChipSize(out_size));
    }
    if mask.width() != scene.width() || mask.height() != scene.height() {
        return Err(RasterError::DimensionMismatch {
            mask_w: mask.width(),
            mask_h: mask.height(),
            scene_w: scene.width(),
            scene_h: scene.height(),
        });
    }
    let (x0, y0, x1, y1) = mask
        .bbox()
        .ok_or_else(|| RasterError::EmptyFootprint(building_id.to_string()))?;
    let (w, h) = (x1 - x0, y1 - y0);
    let side = w.max(h);
    let (ox, oy) = ((side - w) / 2, (side - h) / 2);

    let mut rgb = vec![0u8; side * side * 3];
    let mut cover = vec![0u8; side * side];
    for (x, y) in mask.iter_ones() {
        let (cx, cy) = (x - x0 + ox, y - y0 + oy);
        let p = scene.pixels.get_pixel(x as u32, y as u32).0;
        rgb[(cy * side + cx) * 3..][..3].copy_from_slice(&p);
        cover[cy * side + cx] = 255;
    }

    let n = out_size as u32;
    let pixels = RgbImage::from_raw(n, n, resample_bilinear(&rgb, side, 3, out_size))
        .expect("buffer sized for chip");
    let mask_img = GrayImage::from_raw(n, n, resample_bilinear(&cover, side, 1, out_size))
        .expect("buffer sized for chip");
    let area = mask.count_ones();
    Ok(Chip {
        building_id: building_id.to_string(),
        scene_id: scene.scene_id.clone(),
        pixels,
        mask: mask_img,
        area_fraction: area as f64 / (scene.width() * scene.height()) as f64,
        mask_area: area,
        mask_perimeter: mask.perimeter(),
    })
}

/// Rasterizes and chips every footprint. Footprints whose masks are empty are
/// reported in `skipped`; if none remain the call fails.
pub fn chip_set(scene: &Scene, footprints: &[Footprint], out_size: usize) -> Result<ChipSet, RasterError> {
    if out_size < 8 {
        return Err(RasterError::InvalidChipSize(out_size));
    }
    let results: Vec<Result<Chip, RasterError>> = footprints
        .par_iter()
        .map(|fp| {
            let mask = rasterize(fp, scene.width(), scene.height());
            extract_chip(scene, &mask, out_size, &fp.building_id)
        })
        .collect();

    let mut set = ChipSet {
        chips: Vec::with_capacity(footprints.len()),
        skipped: Vec::new(),
    };
    for (index, (fp, r)) in footprints.iter().zip(results).enumerate() {
        match r {
            Ok(chip) => set.chips.push(chip),
            Err(RasterError::EmptyFootprint(_)) => set.skipped.push(SkippedFootprint {
                index,
                building_id: fp.building_id.clone(),
            }),
            Err(e) => return Err(e),
        }
    }
    if set.chips.is_empty() {
        return Err(RasterError::NoValidFootprints);
    }
    Ok(set)
}
