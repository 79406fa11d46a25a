#![allow(dead_code)]

use perimeterfit_core::edges::PerimeterMap;
use perimeterfit_core::perimeterfit::BinaryMask;
use perimeterfit_core::{LabelMap, RasterImage, IGNORE_LABEL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-class counts recomputed pixel by pixel, without a confusion matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

pub fn recount(pairs: &[(LabelMap, LabelMap)], num_classes: usize) -> Vec<ClassCounts> {
    let mut out = vec![ClassCounts::default(); num_classes];
    for (gt, pred) in pairs {
        for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
            if g == IGNORE_LABEL {
                continue;
            }
            for (c, counts) in out.iter_mut().enumerate() {
                let (is_g, is_p) = (g as usize == c, p as usize == c);
                if is_g && is_p {
                    counts.tp += 1;
                } else if is_p {
                    counts.fp += 1;
                } else if is_g {
                    counts.fn_ += 1;
                }
            }
        }
    }
    out
}

pub fn oracle_miou(counts: &[ClassCounts]) -> Option<f64> {
    let ious: Vec<f64> = counts
        .iter()
        .filter(|c| c.tp + c.fp + c.fn_ > 0)
        .map(|c| c.tp as f64 / (c.tp + c.fp + c.fn_) as f64)
        .collect();
    (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64)
}

pub fn oracle_overactivation(counts: &[ClassCounts]) -> Option<(f64, f64)> {
    let terms: Vec<(f64, f64)> = counts[1..]
        .iter()
        .filter(|c| c.tp > 0)
        .map(|c| (c.fp as f64 / c.tp as f64, c.fn_ as f64 / c.tp as f64))
        .collect();
    if terms.is_empty() {
        return None;
    }
    let n = terms.len() as f64;
    Some((
        terms.iter().map(|t| t.0).sum::<f64>() / n,
        terms.iter().map(|t| t.1).sum::<f64>() / n,
    ))
}

pub fn oracle_decompose(gt: &[bool], pred: &[bool]) -> (Option<f64>, u64) {
    let positives = gt.iter().filter(|&&g| g).count();
    let hits = gt.iter().zip(pred).filter(|(&g, &p)| g && p).count();
    let fp = gt.iter().zip(pred).filter(|(&g, &p)| p && !g).count();
    ((positives > 0).then(|| hits as f64 / positives as f64), fp as u64)
}

pub fn random_labels(rng: &mut impl Rng, w: usize, h: usize, classes: u8, ignore: f64) -> LabelMap {
    let labels = (0..w * h)
        .map(|_| {
            if rng.gen_bool(ignore) {
                IGNORE_LABEL
            } else {
                rng.gen_range(0..classes)
            }
        })
        .collect();
    LabelMap::new(w, h, labels).unwrap()
}

pub fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> RasterImage {
    let data = (0..w * h * 3).map(|_| rng.gen()).collect();
    RasterImage::new(w, h, data).unwrap()
}

/// A few random flat-colored rectangles over a random background, plus noise.
pub fn random_blocky_image(rng: &mut impl Rng, w: usize, h: usize) -> RasterImage {
    let bg: [u8; 3] = rng.gen();
    let mut img = RasterImage::filled(w, h, bg).unwrap();
    for _ in 0..rng.gen_range(1..5) {
        let color: [u8; 3] = rng.gen();
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let (x1, y1) = (rng.gen_range(x0..w), rng.gen_range(y0..h));
        for y in y0..=y1 {
            for x in x0..=x1 {
                img.set_pixel(x, y, color);
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            let mut p = img.pixel(x, y);
            for c in &mut p {
                *c = c.saturating_add_signed(rng.gen_range(-8i8..=8));
            }
            img.set_pixel(x, y, p);
        }
    }
    img
}

/// Random blobby mask made of a few discs.
pub fn random_blob_mask(rng: &mut impl Rng, w: usize, h: usize) -> Vec<bool> {
    let discs: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..6))
        .map(|_| {
            (
                rng.gen_range(0.0..w as f64),
                rng.gen_range(0.0..h as f64),
                rng.gen_range(2.0..(w.min(h) as f64 / 3.0).max(2.5)),
            )
        })
        .collect();
    (0..w * h)
        .map(|p| {
            let (x, y) = ((p % w) as f64, (p / w) as f64);
            discs
                .iter()
                .any(|&(cx, cy, r)| (x - cx).powi(2) + (y - cy).powi(2) <= r * r)
        })
        .collect()
}

/// Random perimeter map made of horizontal and vertical lines, closed
/// rectangles, and scattered edge pixels.
pub fn random_perimeter(rng: &mut impl Rng, w: usize, h: usize) -> PerimeterMap {
    let mut edges = vec![false; w * h];
    for _ in 0..rng.gen_range(0..4) {
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let (x1, y1) = (rng.gen_range(x0..w), rng.gen_range(y0..h));
        for x in x0..=x1 {
            edges[y0 * w + x] = true;
            edges[y1 * w + x] = true;
        }
        for y in y0..=y1 {
            edges[y * w + x0] = true;
            edges[y * w + x1] = true;
        }
    }
    for _ in 0..rng.gen_range(0..3) {
        if rng.gen_bool(0.5) {
            let y = rng.gen_range(0..h);
            (0..w).for_each(|x| edges[y * w + x] = true);
        } else {
            let x = rng.gen_range(0..w);
            (0..h).for_each(|y| edges[y * w + x] = true);
        }
    }
    let density = rng.gen_range(0.0..0.05);
    for e in edges.iter_mut() {
        if rng.gen_bool(density) {
            *e = true;
        }
    }
    PerimeterMap::from_edges(w, h, &edges)
}

/// Scores that are high inside `fg` and low elsewhere, with noise that
/// occasionally crosses `0.5`.
pub fn random_scores(rng: &mut impl Rng, fg: &[bool]) -> Vec<f32> {
    fg.iter()
        .map(|&f| {
            let base: f32 = if f { 0.75 } else { 0.2 };
            (base + rng.gen_range(-0.35f32..0.35)).clamp(0.0, 1.0)
        })
        .collect()
}

pub struct RefineCase {
    pub mask: BinaryMask,
    pub pm: PerimeterMap,
    pub scores: Vec<f32>,
    pub t: f64,
}

pub fn random_refine_case(rng: &mut impl Rng, w: usize, h: usize) -> RefineCase {
    let fg = random_blob_mask(rng, w, h);
    let scores = random_scores(rng, &fg);
    let t = rng.gen_range(0.2..0.7);
    // Masks come from thresholding most of the time, and are arbitrary
    // otherwise so the seed rule sees both sources of background.
    let bits: Vec<bool> = if rng.gen_bool(0.7) {
        scores.iter().map(|&s| f64::from(s) > t).collect()
    } else {
        (0..w * h).map(|_| rng.gen_bool(0.8)).collect()
    };
    RefineCase {
        mask: BinaryMask::new(w, h, bits).unwrap(),
        pm: random_perimeter(rng, w, h),
        scores,
        t,
    }
}

/// Quarter turn counter-clockwise: `(x, y)` moves to `(y, w - 1 - x)`.
pub fn rot90<T: Copy>(w: usize, h: usize, data: &[T]) -> Vec<T> {
    let (nw, nh) = (h, w);
    let mut out = Vec::with_capacity(w * h);
    for ny in 0..nh {
        for nx in 0..nw {
            let (x, y) = (w - 1 - ny, nx);
            out.push(data[y * w + x]);
        }
    }
    debug_assert_eq!(out.len(), nw * nh);
    out
}

pub fn rot90_image(img: &RasterImage) -> RasterImage {
    let (w, h) = img.dims();
    let px: Vec<[u8; 3]> = img.pixels().collect();
    let rotated = rot90(w, h, &px);
    RasterImage::new(h, w, rotated.concat()).unwrap()
}
