//! Hand-crafted chip descriptors standing in for CNN embeddings.

use serde::{Deserialize, Serialize};

use crate::rastergeom::Chip;
use crate::scalar::Scalar;

use super::FEATURE_LEN;

pub const HIST_BINS: usize = 8;
/// Gradient magnitude (on [0, 1] luminance) above which a pixel is an edge.
pub const EDGE_THRESHOLD: f64 = 0.1;
/// Resampled coverage at or above this value marks a chip pixel as building.
pub const COVERAGE_CUTOFF: u8 = 128;

/// Layout: channel means (3), channel stds (3), edge density, area fraction,
/// compactness, luminance histogram (8).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeatureVector<T: Scalar>(#[serde(with = "serde_arrays")] pub [T; FEATURE_LEN]);

pub(crate) mod serde_arrays {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, T: Serialize, const N: usize>(a: &[T; N], s: S) -> Result<S::Ok, S::Error> {
        a.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, T: Deserialize<'de>, const N: usize>(
        d: D,
    ) -> Result<[T; N], D::Error> {
        let v = Vec::<T>::deserialize(d)?;
        let n = v.len();
        v.try_into()
            .map_err(|_| serde::de::Error::custom(format!("expected {N} elements, got {n}")))
    }
}

impl<T: Scalar> FeatureVector<T> {
    pub fn mean(&self) -> [T; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn std(&self) -> [T; 3] {
        [self.0[3], self.0[4], self.0[5]]
    }

    pub fn edge_density(&self) -> T {
        self.0[6]
    }

    pub fn area_fraction(&self) -> T {
        self.0[7]
    }

    pub fn compactness(&self) -> T {
        self.0[8]
    }

    pub fn histogram(&self) -> &[T] {
        &self.0[9..]
    }
}

/// Rec. 601 luma on [0, 1].
#[inline]
pub fn luminance(rgb: [u8; 3]) -> f64 {
    (0.299 * f64::from(rgb[0]) + 0.587 * f64::from(rgb[1]) + 0.114 * f64::from(rgb[2])) / 255.0
}

pub fn extract_features<T: Scalar>(chip: &Chip) -> FeatureVector<T> {
    let (w, h) = (chip.pixels.width() as usize, chip.pixels.height() as usize);
    let lum: Vec<f64> = chip.pixels.pixels().map(|p| luminance(p.0)).collect();

    // Color statistics describe the building itself, not the zero padding.
    let mut fg: Vec<usize> = chip
        .mask
        .pixels()
        .enumerate()
        .filter(|(_, m)| m.0[0] >= COVERAGE_CUTOFF)
        .map(|(i, _)| i)
        .collect();
    if fg.is_empty() {
        fg = (0..w * h).collect();
    }
    let n = fg.len() as f64;
    let raw = chip.pixels.as_raw();
    // Integer sums keep a constant region at exactly zero spread.
    let mut sum = [0u64; 3];
    let mut sum_sq = [0u64; 3];
    for &i in &fg {
        for c in 0..3 {
            let v = u64::from(raw[i * 3 + c]);
            sum[c] += v;
            sum_sq[c] += v * v;
        }
    }
    let count = fg.len() as u64;
    let mean = sum.map(|s| s as f64 / n / 255.0);
    let mut std = [0.0f64; 3];
    for c in 0..3 {
        let spread = (count * sum_sq[c] - sum[c] * sum[c]) as f64;
        std[c] = spread.sqrt() / n / 255.0;
    }

    let mut hist = [0.0f64; HIST_BINS];
    for &i in &fg {
        let b = ((lum[i] * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
        hist[b] += 1.0;
    }
    hist.iter_mut().for_each(|v| *v /= n);

    // Central differences with replicated borders.
    let at = |x: usize, y: usize| lum[y * w + x];
    let mut edges = 0usize;
    for y in 0..h {
        for x in 0..w {
            let gx = (at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y)) / 2.0;
            let gy = (at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1))) / 2.0;
            if (gx * gx + gy * gy).sqrt() > EDGE_THRESHOLD {
                edges += 1;
            }
        }
    }
    let edge_density = edges as f64 / (w * h) as f64;

    let compactness = if chip.mask_area > 0 {
        (chip.mask_perimeter as f64).powi(2) / (4.0 * std::f64::consts::PI * chip.mask_area as f64)
    } else {
        0.0
    };

    let mut v = [0.0f64; FEATURE_LEN];
    v[..3].copy_from_slice(&mean);
    v[3..6].copy_from_slice(&std);
    v[6] = edge_density;
    v[7] = chip.area_fraction;
    v[8] = compactness;
    v[9..].copy_from_slice(&hist);
    FeatureVector(v.map(T::lit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, Luma, Rgb, RgbImage};

    fn chip(pixels: RgbImage) -> Chip {
        let n = pixels.width();
        Chip {
            building_id: "b".into(),
            scene_id: "s".into(),
            mask: GrayImage::from_pixel(n, n, Luma([255])),
            pixels,
            area_fraction: 0.5,
            mask_area: 16,
            mask_perimeter: 16,
        }
    }

    #[test]
    fn constant_chip() {
        let f: FeatureVector<f64> = extract_features(&chip(RgbImage::from_pixel(8, 8, Rgb([100, 150, 200]))));
        assert_eq!(f.std(), [0.0; 3]);
        assert_eq!(f.edge_density(), 0.0);
        assert!((f.mean()[1] - 150.0 / 255.0).abs() < 1e-12);
        assert!((f.histogram().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // 4x4 square: perimeter 16, area 16 -> 256 / (64 pi) = 4 / pi.
        assert!((f.compactness() - 4.0 / std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(f.area_fraction(), 0.5);
    }

    #[test]
    fn checkerboard_edge_density_matches_per_pixel_oracle() {
        let n = 8u32;
        let img = RgbImage::from_fn(n, n, |x, y| if (x + y) % 2 == 0 { Rgb([255; 3]) } else { Rgb([0; 3]) });
        let f: FeatureVector<f64> = extract_features(&chip(img.clone()));

        // Direct evaluation of the same definition, pixel by pixel.
        let l = |x: i64, y: i64| {
            let cx = x.clamp(0, n as i64 - 1) as u32;
            let cy = y.clamp(0, n as i64 - 1) as u32;
            luminance(img.get_pixel(cx, cy).0)
        };
        let mut count = 0;
        for y in 0..n as i64 {
            for x in 0..n as i64 {
                let gx = (l(x + 1, y) - l(x - 1, y)) / 2.0;
                let gy = (l(x, y + 1) - l(x, y - 1)) / 2.0;
                if gx.hypot(gy) > 0.1 {
                    count += 1;
                }
            }
        }
        assert_eq!(f.edge_density(), count as f64 / 64.0);
        // Interior central differences cancel on a 1-pixel checkerboard;
        // only the replicated border contributes.
        assert_eq!(count, 28);
    }

    #[test]
    fn histogram_normalized_for_any_chip() {
        let img = RgbImage::from_fn(16, 16, |x, y| Rgb([(x * 16) as u8, (y * 16) as u8, ((x * y) % 256) as u8]));
        let f: FeatureVector<f32> = extract_features(&chip(img));
        assert!((f.histogram().iter().map(|&v| f64::from(v)).sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(f.0.iter().all(|v| v.is_finite()));
        assert!(f.std().iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn ignores_padding_when_mask_present() {
        let mut c = chip(RgbImage::from_pixel(8, 8, Rgb([200, 200, 200])));
        for y in 0..8 {
            for x in 4..8 {
                c.pixels.put_pixel(x, y, Rgb([0, 0, 0]));
                c.mask.put_pixel(x, y, Luma([0]));
            }
        }
        let f: FeatureVector<f64> = extract_features(&c);
        assert!((f.mean()[0] - 200.0 / 255.0).abs() < 1e-12);
        assert_eq!(f.std()[0], 0.0);
    }
}
