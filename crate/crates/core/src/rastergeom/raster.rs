use super::Footprint;

/// One bit per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

impl BitMask {
    pub fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        BitMask {
            width,
            height,
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        let i = y * self.width + x;
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        debug_assert!(x < self.width && y < self.height);
        let i = y * self.width + x;
        if on {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Bounding box of set pixels as `(x0, y0, x1, y1)`, exclusive upper corner.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut b: Option<(usize, usize, usize, usize)> = None;
        for (x, y) in self.iter_ones() {
            b = Some(match b {
                None => (x, y, x + 1, y + 1),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x + 1), y1.max(y + 1)),
            });
        }
        b
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let i = wi * 64 + b;
                Some((i % w, i / w))
            })
        })
    }

    /// Number of unit pixel edges separating a set pixel from an unset pixel
    /// or from the raster border.
    pub fn perimeter(&self) -> u64 {
        let mut edges = 0u64;
        for (x, y) in self.iter_ones() {
            let exposed = [
                x == 0 || !self.get(x - 1, y),
                x + 1 == self.width || !self.get(x + 1, y),
                y == 0 || !self.get(x, y - 1),
                y + 1 == self.height || !self.get(x, y + 1),
            ];
            edges += exposed.iter().filter(|&&e| e).count() as u64;
        }
        edges
    }

    pub fn intersects(&self, other: &BitMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn union_with(&mut self, other: &BitMask) {
        assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }
}

/// x coordinate where edge `a`-`b` crosses the horizontal line at `y`.
#[inline]
pub(crate) fn edge_crossing(a: (f64, f64), b: (f64, f64), y: f64) -> f64 {
    a.0 + (y - a.1) * (b.0 - a.0) / (b.1 - a.1)
}

/// Half-open vertical extent: an edge spans `y` iff `min_y <= y < max_y`.
/// Horizontal edges never span anything.
#[inline]
pub(crate) fn edge_spans(a: (f64, f64), b: (f64, f64), y: f64) -> bool {
    (a.1 <= y) != (b.1 <= y)
}

/// Burns the footprint into a `width` x `height` mask. A pixel is set when its
/// center lies inside under the even-odd rule over all rings. Centers exactly
/// on an edge belong to the polygon on the edge's right/below side, so pixels
/// on a shared boundary between adjacent polygons are claimed exactly once.
pub fn rasterize(fp: &Footprint, width: usize, height: usize) -> BitMask {
    let mut mask = BitMask::new(width, height);
    let edges: Vec<((f64, f64), (f64, f64))> = fp
        .rings
        .iter()
        .flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
        .filter(|(a, b)| a.1 != b.1)
        .collect();
    if edges.is_empty() {
        return mask;
    }

    let mut xs: Vec<f64> = Vec::new();
    for row in 0..height {
        let cy = row as f64 + 0.5;
        xs.clear();
        xs.extend(
            edges
                .iter()
                .filter(|(a, b)| edge_spans(*a, *b, cy))
                .map(|(a, b)| edge_crossing(*a, *b, cy)),
        );
        if xs.is_empty() {
            continue;
        }
        xs.sort_by(f64::total_cmp);
        // A center c is inside iff an odd number of crossings satisfy x <= c,
        // i.e. c falls in [xs[2k], xs[2k+1]).
        for span in xs.chunks_exact(2) {
            let (lo, hi) = (span[0], span[1]);
            let mut col = first_center_at_or_after(lo);
            while col < width && (col as f64 + 0.5) < hi {
                mask.set(col, row, true);
                col += 1;
            }
        }
    }
    mask
}

/// Smallest column whose center is `>= x`, clamped at 0.
fn first_center_at_or_after(x: f64) -> usize {
    if x <= 0.5 {
        return 0;
    }
    let mut col = (x - 0.5).ceil().max(0.0) as usize;
    // Guard the ceil against rounding in `x - 0.5`.
    while col > 0 && (col as f64 - 0.5) >= x {
        col -= 1;
    }
    while (col as f64 + 0.5) < x {
        col += 1;
    }
    col
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(pts: &[(f64, f64)]) -> Footprint {
        let mut ring = pts.to_vec();
        ring.push(pts[0]);
        Footprint {
            building_id: "p".into(),
            rings: vec![ring],
        }
    }

    /// Per-center ray cast, independent of the scanline span walk.
    fn brute_force(fp: &Footprint, w: usize, h: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
                let mut inside = false;
                for ring in &fp.rings {
                    for e in ring.windows(2) {
                        if edge_spans(e[0], e[1], cy) && edge_crossing(e[0], e[1], cy) <= cx {
                            inside = !inside;
                        }
                    }
                }
                if inside {
                    out.push((x, y));
                }
            }
        }
        out
    }

    #[test]
    fn square_covers_all_centers() {
        let m = rasterize(&poly(&[(0., 0.), (2., 0.), (2., 2.), (0., 2.)]), 2, 2);
        assert_eq!(m.count_ones(), 4);
    }

    #[test]
    fn collinear_is_empty() {
        let m = rasterize(&poly(&[(0., 0.), (1., 1.), (3., 3.)]), 4, 4);
        assert!(m.is_empty());
    }

    #[test]
    fn triangle_matches_brute_force() {
        let fp = poly(&[(0., 0.), (8., 0.), (0., 8.)]);
        let m = rasterize(&fp, 8, 8);
        let got: Vec<_> = {
            let mut v: Vec<_> = m.iter_ones().collect();
            v.sort_by_key(|&(x, y)| (y, x));
            v
        };
        assert_eq!(got, brute_force(&fp, 8, 8));
        // Rows 0..8 hold 8,7,...,1 pixels minus the diagonal whose centers
        // sit on the hypotenuse x + y = 8 only when x + y + 1 = 8.
        assert_eq!(m.count_ones(), 28);
    }

    #[test]
    fn hole_subtracts() {
        let mut fp = poly(&[(0., 0.), (6., 0.), (6., 6.), (0., 6.)]);
        fp.rings.push(vec![(2., 2.), (4., 2.), (4., 4.), (2., 4.), (2., 2.)]);
        let m = rasterize(&fp, 6, 6);
        assert_eq!(m.count_ones(), 32);
        assert!(!m.get(2, 2) && !m.get(3, 3));
        assert!(m.get(1, 1) && m.get(4, 4));
    }

    #[test]
    fn centers_on_edges_follow_top_left_rule() {
        // Edges pass exactly through centers at x = 1.5 and x = 3.5.
        let fp = poly(&[(1.5, 0.5), (3.5, 0.5), (3.5, 2.5), (1.5, 2.5)]);
        let m = rasterize(&fp, 5, 4);
        let got: Vec<_> = m.iter_ones().collect();
        assert_eq!(got, vec![(1, 0), (2, 0), (1, 1), (2, 1)]);
    }

    #[test]
    fn clips_to_raster() {
        let m = rasterize(&poly(&[(-5., -5.), (50., -5.), (50., 50.), (-5., 50.)]), 3, 2);
        assert_eq!(m.count_ones(), 6);
    }

    #[test]
    fn perimeter_and_bbox() {
        let m = rasterize(&poly(&[(1., 1.), (4., 1.), (4., 3.), (1., 3.)]), 6, 6);
        assert_eq!(m.count_ones(), 6);
        assert_eq!(m.perimeter(), 10);
        assert_eq!(m.bbox(), Some((1, 1, 4, 3)));
        assert_eq!(BitMask::new(3, 3).bbox(), None);
    }
}
