//! Rasterization and chipping against direct per-pixel evaluation.

use image::{Rgb, RgbImage};
use predism_core::rastergeom::{chip_set, extract_chip, rasterize, Footprint};
use predism_core::Scene;
use proptest::prelude::*;

/// Even-odd test at every pixel center, counting edge crossings at or left
/// of the center. Half-open in y so shared vertices count once.
fn brute_force(fp: &Footprint, w: usize, h: usize) -> Vec<bool> {
    let mut out = vec![false; w * h];
    for py in 0..h {
        for px in 0..w {
            let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
            let mut inside = false;
            for ring in &fp.rings {
                for e in ring.windows(2) {
                    let ((ax, ay), (bx, by)) = (e[0], e[1]);
                    if (ay <= cy) != (by <= cy) {
                        let xi = ax + (cy - ay) * (bx - ax) / (by - ay);
                        if xi <= cx {
                            inside = !inside;
                        }
                    }
                }
            }
            out[py * w + px] = inside;
        }
    }
    out
}

fn polygon() -> impl Strategy<Value = (Footprint, usize, usize)> {
    (4usize..=32, 4usize..=32).prop_flat_map(|(w, h)| {
        // Half-pixel grid coordinates hit pixel centers exactly, which
        // exercises the tie rules; slightly out-of-frame vertices test clipping.
        let coord = move |n: usize| (-2i32..=(2 * n as i32 + 2)).prop_map(|v| f64::from(v) / 2.0);
        let vertex = (coord(w), coord(h));
        (
            prop::collection::vec(vertex.clone(), 3..9),
            prop::option::of(prop::collection::vec(vertex, 3..6)),
        )
            .prop_map(move |(outer, hole)| {
                let close = |mut r: Vec<(f64, f64)>| {
                    r.push(r[0]);
                    r
                };
                let mut rings = vec![close(outer)];
                if let Some(h) = hole {
                    rings.push(close(h));
                }
                (
                    Footprint {
                        building_id: "p".into(),
                        rings,
                    },
                    w,
                    h,
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mask_matches_even_odd_centers((fp, w, h) in polygon()) {
        let mask = rasterize(&fp, w, h);
        let oracle = brute_force(&fp, w, h);
        let mut mismatched = 0;
        for y in 0..h {
            for x in 0..w {
                if mask.get(x, y) != oracle[y * w + x] {
                    mismatched += 1;
                }
            }
        }
        prop_assert_eq!(mismatched, 0);
        prop_assert_eq!(mask.count_ones() as usize, oracle.iter().filter(|&&b| b).count());
    }

    #[test]
    fn disjoint_rectangles_give_disjoint_masks(cuts in prop::collection::vec(1usize..31, 1..6)) {
        // Vertical strips sharing edges.
        let mut xs: Vec<usize> = cuts;
        xs.push(0);
        xs.push(32);
        xs.sort_unstable();
        xs.dedup();
        let masks: Vec<_> = xs
            .windows(2)
            .map(|p| rasterize(&Footprint::rect("r", p[0] as f64, 3.0, p[1] as f64, 20.0), 32, 24))
            .collect();
        for i in 0..masks.len() {
            for j in i + 1..masks.len() {
                prop_assert!(!masks[i].intersects(&masks[j]));
            }
        }
        let total: u64 = masks.iter().map(|m| m.count_ones()).sum();
        prop_assert_eq!(total, 32 * 17);
    }
}

#[test]
fn chip_set_matches_per_footprint_chips() {
    let img = RgbImage::from_fn(120, 100, |x, y| Rgb([(x * 2) as u8, (y * 2) as u8, ((x + y) % 256) as u8]));
    let scene = Scene::new("grid", img, None).unwrap();
    let fps: Vec<Footprint> = (0..100)
        .map(|i| {
            let (gx, gy) = ((i % 10) as f64 * 12.0, (i / 10) as f64 * 10.0);
            let (w, h) = (2.0 + (i % 7) as f64, 2.0 + (i % 5) as f64);
            Footprint::rect(format!("b{i}"), gx, gy, gx + w, gy + h)
        })
        .collect();
    let set = chip_set(&scene, &fps, 16).unwrap();
    assert_eq!(set.chips.len(), 100);
    assert!(set.skipped.is_empty());
    for (fp, chip) in fps.iter().zip(&set.chips) {
        let mask = rasterize(fp, 120, 100);
        let alone = extract_chip(&scene, &mask, 16, &fp.building_id).unwrap();
        assert_eq!(&alone, chip);
        // Integer rectangles cover exactly w*h pixel centers.
        let (x0, y0) = (fp.rings[0][0].0, fp.rings[0][0].1);
        let (x1, y1) = (fp.rings[0][2].0, fp.rings[0][2].1);
        let (w, h) = ((x1 - x0) as u64, (y1 - y0) as u64);
        assert_eq!(chip.mask_area, w * h);
        assert_eq!(chip.mask_perimeter, 2 * (w + h));
        assert_eq!(chip.area_fraction, (w * h) as f64 / 12000.0);
    }
}

#[test]
fn empty_footprints_are_skipped_not_fatal() {
    let scene = Scene::new("s", RgbImage::new(16, 16), None).unwrap();
    let fps = vec![
        Footprint::rect("a", 1.0, 1.0, 5.0, 5.0),
        Footprint::rect("sliver", 8.1, 8.1, 8.2, 8.2),
        Footprint::rect("outside", 30.0, 30.0, 40.0, 40.0),
    ];
    let set = chip_set(&scene, &fps, 8).unwrap();
    assert_eq!(set.chips.len(), 1);
    let idx: Vec<_> = set.skipped.iter().map(|s| s.index).collect();
    assert_eq!(idx, [1, 2]);
    assert_eq!(chip_set(&scene, &fps[1..], 8).unwrap_err().code(), "NoValidFootprints");
}
