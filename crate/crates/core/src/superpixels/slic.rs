use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{enforce_connectivity, SegmentMap, SimplifyParams};
use crate::error::{Error, Result};
use crate::image::{rgb_to_lab, LabImage, RasterImage};

#[derive(Debug, Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

/// SLIC superpixels: local k-means in the joint `(L, a, b, x, y)` space.
///
/// Seeds start on a regular grid of about `slic_k` cells and move to the
/// lowest-gradient pixel of their 3x3 neighborhood. Distances are
/// `sqrt(d_lab^2 + (compactness / S)^2 * d_xy^2)` with `S = sqrt(w * h / k)`,
/// and each seed searches a `2S x 2S` window. The result is passed through
/// [`enforce_connectivity`].
pub fn slic(image: &RasterImage, params: &SimplifyParams) -> Result<SegmentMap> {
    slic_with_energy(image, params).map(|(seg, _)| seg)
}

/// [`slic`] together with the total squared 5-D distance of the assignment
/// at every iteration. The sequence never increases.
pub fn slic_with_energy(
    image: &RasterImage,
    params: &SimplifyParams,
) -> Result<(SegmentMap, Vec<f64>)> {
    let (w, h) = image.dims();
    let n = w * h;
    let k = params.slic_k;
    if k == 0 || n < k {
        return Err(Error::InvalidParameter(format!(
            "slic_k = {k} seeds for a {w}x{h} image"
        )));
    }
    if !(params.slic_compactness > 0.0) || params.slic_iters == 0 {
        return Err(Error::InvalidParameter(
            "slic needs compactness > 0 and at least one iteration".into(),
        ));
    }

    let lab = rgb_to_lab(image);
    let step = libm::sqrt(n as f64 / k as f64);
    let spatial_weight = {
        let m = params.slic_compactness / step;
        m * m
    };
    let mut centers = initial_centers(&lab, step);

    let dist2 = |p: usize, c: &Center| -> f64 {
        let px = lab.data[p];
        let dl = px[0] - c.lab[0];
        let da = px[1] - c.lab[1];
        let db = px[2] - c.lab[2];
        let dx = (p % w) as f64 - c.x;
        let dy = (p / w) as f64 - c.y;
        dl * dl + da * da + db * db + spatial_weight * (dx * dx + dy * dy)
    };

    let mut labels = vec![usize::MAX; n];
    let mut best = vec![f64::INFINITY; n];
    let mut energies: Vec<f64> = Vec::with_capacity(params.slic_iters);
    for _ in 0..params.slic_iters {
        // Keeping the previous assignment as a candidate makes the energy
        // non-increasing even when a center drifts out of a pixel's window.
        for p in 0..n {
            best[p] = match labels[p] {
                usize::MAX => f64::INFINITY,
                l => dist2(p, &centers[l]),
            };
        }
        for (j, c) in centers.iter().enumerate() {
            let x0 = libm::ceil(c.x - step).max(0.0) as usize;
            let x1 = (libm::floor(c.x + step) as isize).min(w as isize - 1);
            let y0 = libm::ceil(c.y - step).max(0.0) as usize;
            let y1 = (libm::floor(c.y + step) as isize).min(h as isize - 1);
            if x1 < 0 || y1 < 0 {
                continue;
            }
            for y in y0..=y1 as usize {
                for x in x0..=x1 as usize {
                    let p = y * w + x;
                    let d = dist2(p, c);
                    if d < best[p] {
                        best[p] = d;
                        labels[p] = j;
                    }
                }
            }
        }
        for p in 0..n {
            if labels[p] == usize::MAX {
                let (j, d) = centers
                    .iter()
                    .enumerate()
                    .map(|(j, c)| (j, dist2(p, c)))
                    .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
                labels[p] = j;
                best[p] = d;
            }
        }
        let energy: f64 = best.iter().sum();
        if let Some(&prev) = energies.last() {
            debug_assert!(
                energy <= prev + 1e-9 * prev.abs().max(1.0),
                "SLIC energy increased: {prev} -> {energy}"
            );
        }
        energies.push(energy);

        let mut sums = vec![[0.0f64; 5]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for p in 0..n {
            let l = labels[p];
            let px = lab.data[p];
            let s = &mut sums[l];
            s[0] += px[0];
            s[1] += px[1];
            s[2] += px[2];
            s[3] += (p % w) as f64;
            s[4] += (p / w) as f64;
            counts[l] += 1;
        }
        for (c, (s, &cnt)) in centers.iter_mut().zip(sums.iter().zip(&counts)) {
            if cnt > 0 {
                let m = cnt as f64;
                *c = Center {
                    lab: [s[0] / m, s[1] / m, s[2] / m],
                    x: s[3] / m,
                    y: s[4] / m,
                };
            }
        }
    }

    let seg = SegmentMap::from_labels(w, h, &labels)?;
    Ok((enforce_connectivity(&seg), energies))
}

fn initial_centers(lab: &LabImage, step: f64) -> Vec<Center> {
    let (w, h) = (lab.width, lab.height);
    let nx = (libm::round(w as f64 / step) as usize).clamp(1, w);
    let ny = (libm::round(h as f64 / step) as usize).clamp(1, h);
    let cell_w = w as f64 / nx as f64;
    let cell_h = h as f64 / ny as f64;
    // A 3x3 move could make neighboring seeds collide on dense grids.
    let perturb = cell_w >= 3.0 && cell_h >= 3.0;

    let gradient = |x: usize, y: usize| -> f64 {
        let xl = x.saturating_sub(1);
        let xr = (x + 1).min(w - 1);
        let yu = y.saturating_sub(1);
        let yd = (y + 1).min(h - 1);
        let d2 = |a: [f64; 3], b: [f64; 3]| {
            (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2])
        };
        d2(lab.get(xr, y), lab.get(xl, y)) + d2(lab.get(x, yd), lab.get(x, yu))
    };

    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let mut cx = (i as f64 + 0.5) * cell_w - 0.5;
            let mut cy = (j as f64 + 0.5) * cell_h - 0.5;
            let px = (libm::round(cx) as usize).min(w - 1);
            let py = (libm::round(cy) as usize).min(h - 1);
            let (mut bx, mut by) = (px, py);
            if perturb {
                let mut best = gradient(px, py);
                for y in py.saturating_sub(1)..=(py + 1).min(h - 1) {
                    for x in px.saturating_sub(1)..=(px + 1).min(w - 1) {
                        let g = gradient(x, y);
                        if g < best {
                            best = g;
                            bx = x;
                            by = y;
                        }
                    }
                }
                if (bx, by) != (px, py) {
                    cx = bx as f64;
                    cy = by as f64;
                }
            }
            centers.push(Center {
                lab: lab.get(bx, by),
                x: cx,
                y: cy,
            });
        }
    }
    centers
}
