use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{SegmentMap, SimplifyParams};
use crate::error::{Error, Result};
use crate::image::{rgb_to_lab, RasterImage};

/// Density estimate and parent links of a Quickshift run.
#[derive(Debug, Clone, PartialEq)]
pub struct QuickshiftForest {
    pub width: usize,
    pub height: usize,
    pub density: Vec<f64>,
    /// Parent pixel index; roots point at themselves.
    pub parent: Vec<usize>,
}

impl QuickshiftForest {
    pub fn is_root(&self, p: usize) -> bool {
        self.parent[p] == p
    }

    pub fn root(&self, mut p: usize) -> usize {
        while self.parent[p] != p {
            p = self.parent[p];
        }
        p
    }
}

/// Quickshift mode seeking; every tree of the link forest is one segment.
pub fn quickshift(image: &RasterImage, params: &SimplifyParams) -> Result<SegmentMap> {
    let forest = quickshift_forest(image, params)?;
    let n = forest.parent.len();
    let mut root = vec![usize::MAX; n];
    let mut path = Vec::new();
    for start in 0..n {
        let mut p = start;
        while root[p] == usize::MAX && forest.parent[p] != p {
            path.push(p);
            p = forest.parent[p];
        }
        let r = if root[p] == usize::MAX { p } else { root[p] };
        root[p] = r;
        for q in path.drain(..) {
            root[q] = r;
        }
    }
    SegmentMap::from_labels(image.width(), image.height(), &root)
}

/// Builds the Quickshift forest over joint `(L, a, b, x, y)` features.
///
/// The density of a pixel is the sum of `exp(-d^2 / (2 sigma^2))` over the
/// pixels of the square window of half-size `floor(qs_max_dist)` around it,
/// itself included, with `sigma = qs_kernel_size`.
/// Each pixel links to the nearest pixel of its window, in joint distance and
/// no farther than `qs_max_dist`, that ranks strictly higher. Pixels rank by
/// density; equal densities rank the earlier raster position higher.
pub fn quickshift_forest(image: &RasterImage, params: &SimplifyParams) -> Result<QuickshiftForest> {
    let sigma = params.qs_kernel_size;
    let max_dist = params.qs_max_dist;
    if !(sigma.is_finite() && sigma > 0.0 && max_dist.is_finite() && max_dist > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "quickshift needs kernel_size > 0 and max_dist > 0, got {sigma} and {max_dist}"
        )));
    }
    let (w, h) = image.dims();
    let n = w * h;
    let lab = rgb_to_lab(image).data;
    let r = libm::floor(max_dist) as usize;
    let inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    let max_d2 = max_dist * max_dist;
    let joint_d2 = |p: usize, q: usize, spatial: f64| -> f64 {
        let (a, b) = (lab[p], lab[q]);
        (a[0] - b[0]) * (a[0] - b[0])
            + (a[1] - b[1]) * (a[1] - b[1])
            + (a[2] - b[2]) * (a[2] - b[2])
            + spatial
    };

    // Each unordered pair of the window is visited once, from its earlier
    // pixel in raster order, and adds the same kernel value to both ends.
    let mut density = vec![1.0; n];
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            for yy in y..=(y + r).min(h - 1) {
                let dy = (yy - y) as f64;
                let x0 = if yy == y { x + 1 } else { x.saturating_sub(r) };
                for xx in x0..=(x + r).min(w - 1) {
                    let q = yy * w + xx;
                    let dx = xx as f64 - x as f64;
                    let k = libm::exp(-joint_d2(p, q, dx * dx + dy * dy) * inv_two_sigma2);
                    density[p] += k;
                    density[q] += k;
                }
            }
        }
    }

    let ranks_higher = |q: usize, p: usize| {
        density[q] > density[p] || (density[q] == density[p] && q < p)
    };
    let mut parent: Vec<usize> = (0..n).collect();
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let mut best = f64::INFINITY;
            for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                let dy = yy as f64 - y as f64;
                for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    let q = yy * w + xx;
                    let dx = xx as f64 - x as f64;
                    let spatial = dx * dx + dy * dy;
                    if q == p || spatial > max_d2 || !ranks_higher(q, p) {
                        continue;
                    }
                    let d = joint_d2(p, q, spatial);
                    if d <= max_d2 && d < best {
                        best = d;
                        parent[p] = q;
                    }
                }
            }
        }
    }

    for p in 0..n {
        assert!(
            density[parent[p]] >= density[p],
            "quickshift parent of pixel {p} has lower density"
        );
    }

    Ok(QuickshiftForest {
        width: w,
        height: h,
        density,
        parent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superpixels::SimplifyParams;

    fn params(sigma: f64, max_dist: f64) -> SimplifyParams {
        SimplifyParams {
            qs_kernel_size: sigma,
            qs_max_dist: max_dist,
            ..SimplifyParams::default()
        }
    }

    fn noisy(w: usize, h: usize) -> RasterImage {
        let mut state = 0x2545_f491_u32;
        RasterImage::from_fn(w, h, |x, y| {
            state ^= state << 13;
            state ^= state >> 17;
            state ^= state << 5;
            let base = if (x / 4 + y / 3) % 2 == 0 { 60 } else { 170 };
            [base + (state % 40) as u8, base, base + ((state >> 8) % 30) as u8]
        })
        .unwrap()
    }

    #[test]
    fn matches_direct_evaluation() {
        let img = noisy(13, 9);
        let (sigma, max_dist) = (2.5, 3.5);
        let forest = quickshift_forest(&img, &params(sigma, max_dist)).unwrap();
        let lab = rgb_to_lab(&img);
        let d2 = |p: usize, q: usize| {
            let (a, b) = (lab.data[p], lab.data[q]);
            let (dx, dy) = ((p % 13) as f64 - (q % 13) as f64, (p / 13) as f64 - (q / 13) as f64);
            (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>() + dx * dx + dy * dy
        };
        let in_window = |p: usize, q: usize| {
            (p % 13).abs_diff(q % 13) <= 3 && (p / 13).abs_diff(q / 13) <= 3
        };
        let n = 13 * 9;
        let density: Vec<f64> = (0..n)
            .map(|p| {
                (0..n)
                    .filter(|&q| in_window(p, q))
                    .map(|q| libm::exp(-d2(p, q) / (2.0 * sigma * sigma)))
                    .sum()
            })
            .collect();
        for p in 0..n {
            assert!((density[p] - forest.density[p]).abs() < 1e-9);
            let want = (0..n)
                .filter(|&q| q != p && in_window(p, q) && d2(p, q) <= max_dist * max_dist)
                .filter(|&q| {
                    forest.density[q] > forest.density[p]
                        || (forest.density[q] == forest.density[p] && q < p)
                })
                .min_by(|&a, &b| d2(p, a).partial_cmp(&d2(p, b)).unwrap().then(a.cmp(&b)))
                .unwrap_or(p);
            assert_eq!(forest.parent[p], want, "pixel {p}");
        }
    }

    #[test]
    fn short_links_leave_only_roots() {
        let forest = quickshift_forest(&noisy(6, 5), &params(2.0, 0.9)).unwrap();
        assert!((0..30).all(|p| forest.is_root(p)));
        assert_eq!(quickshift(&noisy(6, 5), &params(2.0, 0.9)).unwrap().num_segments(), 30);
    }

    #[test]
    fn uniform_image_is_deterministic() {
        let img = RasterImage::filled(9, 7, [90, 120, 30]).unwrap();
        let a = quickshift_forest(&img, &params(3.0, 4.0)).unwrap();
        assert_eq!(a, quickshift_forest(&img, &params(3.0, 4.0)).unwrap());
        for p in 0..63 {
            assert!(a.density[a.root(p)] >= a.density[p]);
        }
    }
}
