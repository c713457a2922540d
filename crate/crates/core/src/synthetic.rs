//! Generators for synthetic scenes with a known damage rule, used for smoke
//! runs and for checking that the heads can learn.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::disaster::DisasterType;
use crate::ensemble::{extract_features, head_input, meta_vector, TrainingSample};
use crate::error::Result;
use crate::hazard::HazardLevel;
use crate::rastergeom::{chip_set, Footprint, Scene};

/// One building on its own small scene.
#[derive(Debug, Clone)]
pub struct SyntheticBuilding {
    pub scene: Scene,
    pub footprint: Footprint,
    pub hazard: HazardLevel,
    /// Luminance bin 0..5 of the roof.
    pub bin: u8,
    pub level: u8,
}

/// Damage rule: the luminance bin sets a base level and the hazard shifts it,
/// `clamp(bin + 1 + (hazard - 3), 1, 5)`.
pub fn separable_level(bin: u8, hazard: HazardLevel) -> u8 {
    (i16::from(bin) + 1 + i16::from(hazard.get()) - 3).clamp(1, 5) as u8
}

/// `n` single-building scenes. Roof luminance is `(bin + 0.5 + u) / 5` with
/// `u` uniform in [-0.3, 0.3]; the background is random noise.
pub fn separable_buildings(n: usize, side: u32, seed: u64) -> Vec<SyntheticBuilding> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let bin: u8 = rng.random_range(0..5);
            let hazard = HazardLevel::new(rng.random_range(1..=5)).expect("level in range");
            let lum = (f64::from(bin) + 0.5 + rng.random_range(-0.3..=0.3)) / 5.0;
            let roof = (lum * 255.0).round() as u8;
            let w = rng.random_range(side / 4..=side * 3 / 4);
            let h = rng.random_range(side / 4..=side * 3 / 4);
            let x0 = rng.random_range(0..=side - w);
            let y0 = rng.random_range(0..=side - h);
            let mut img = RgbImage::from_fn(side, side, |_, _| Rgb([rng.random(), rng.random(), rng.random()]));
            for y in y0..y0 + h {
                for x in x0..x0 + w {
                    img.put_pixel(x, y, Rgb([roof; 3]));
                }
            }
            let id = format!("syn-{i}");
            let footprint = Footprint::rect(
                id.clone(),
                f64::from(x0),
                f64::from(y0),
                f64::from(x0 + w),
                f64::from(y0 + h),
            );
            SyntheticBuilding {
                scene: Scene::new(format!("scene-{i}"), img, None).expect("non-empty scene"),
                footprint,
                hazard,
                bin,
                level: separable_level(bin, hazard),
            }
        })
        .collect()
}

/// Runs chips, features and meta for each building.
pub fn training_samples(
    buildings: &[SyntheticBuilding],
    disaster_type: DisasterType,
    chip_size: usize,
) -> Result<Vec<TrainingSample<f64>>> {
    buildings
        .iter()
        .map(|b| {
            let chips = chip_set(&b.scene, std::slice::from_ref(&b.footprint), chip_size)?;
            let features = extract_features::<f64>(&chips.chips[0]);
            let meta = meta_vector::<f64>(disaster_type, b.hazard, &[None; 7]);
            Ok(TrainingSample {
                input: head_input(&features, &meta),
                level: b.level,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_and_determinism() {
        let lv = |n| HazardLevel::new(n).unwrap();
        assert_eq!(separable_level(0, lv(1)), 1);
        assert_eq!(separable_level(4, lv(5)), 5);
        assert_eq!(separable_level(2, lv(3)), 3);
        assert_eq!(separable_level(2, lv(4)), 4);
        let a = separable_buildings(5, 32, 1);
        let b = separable_buildings(5, 32, 1);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.scene, y.scene);
            assert_eq!(x.level, y.level);
        }
    }
}
