//! Perimeter-guided pruning of thresholded class activation maps.
//!
//! A *target cluster* is a 4-connected region of non-edge pixels, bounded by
//! perimeter edges and the image border. Thresholding a class score plane
//! splits pixels into foreground (`score > t`) and background
//! (`score <= t`); every cluster that contains at least one background pixel
//! is cleared entirely, so only clusters lying wholly inside the activated
//! area survive. Refinement can therefore only shrink a mask away from the
//! perimeter.
//!
//! [`refine_class`] computes this with one connected-component pass;
//! [`floodfill_reference`] is the queue-driven flood fill it must agree with.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::edges::{canny, CannyParams, PerimeterMap};
use crate::error::{check_same_dims, Error, Result};
use crate::image::{LabelMap, RasterImage, ScoreMap, IGNORE_LABEL};
use crate::superpixels::{flatten, simplify, SimplifyParams};

/// Per-pixel foreground flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height} mask with {} flags",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    /// Pixels of `labels` equal to `class_id`.
    pub fn from_labels(labels: &LabelMap, class_id: u8) -> Self {
        Self {
            width: labels.width(),
            height: labels.height(),
            bits: labels.labels().iter().map(|&l| l == class_id).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && b)
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        check_same_dims(self.dims(), other.dims())?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        })
    }
}

/// Borrowed view of one class plane of a [`ScoreMap`].
#[derive(Debug, Clone, Copy)]
pub struct ScorePlane<'a> {
    pub width: usize,
    pub height: usize,
    pub scores: &'a [f32],
}

impl<'a> ScorePlane<'a> {
    pub fn new(width: usize, height: usize, scores: &'a [f32]) -> Result<Self> {
        if scores.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height} plane with {} scores",
                scores.len()
            )));
        }
        Ok(Self {
            width,
            height,
            scores,
        })
    }

    pub fn of(map: &'a ScoreMap, plane: usize) -> Self {
        Self {
            width: map.width(),
            height: map.height(),
            scores: map.plane(plane),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// How the SLIC- and Quickshift-variant masks of a class are combined.
///
/// The declaration order is the tie-break order used by the grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    Union,
    Intersection,
    SlicOnly,
    QuickOnly,
}

impl Fusion {
    pub const ALL: [Fusion; 4] = [
        Fusion::Union,
        Fusion::Intersection,
        Fusion::SlicOnly,
        Fusion::QuickOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Fusion::Union => "union",
            Fusion::Intersection => "intersection",
            Fusion::SlicOnly => "slic_only",
            Fusion::QuickOnly => "quick_only",
        }
    }

    pub fn parse(s: &str) -> Option<Fusion> {
        Fusion::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineParams {
    /// Threshold applied with the SLIC perimeter map.
    pub threshold_slic: f64,
    /// Threshold applied with the Quickshift perimeter map.
    pub threshold_quick: f64,
    pub fusion: Fusion,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            threshold_slic: 0.3,
            threshold_quick: 0.3,
            fusion: Fusion::Union,
        }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("threshold_slic", self.threshold_slic),
            ("threshold_quick", self.threshold_quick),
        ] {
            check_threshold(name, t)?;
        }
        Ok(())
    }
}

fn check_threshold(name: &str, t: f64) -> Result<()> {
    if 0.0 < t && t < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} = {t} must lie in (0, 1)"
        )))
    }
}

/// Foreground where `score > t`; pixels with `score <= t` are background.
pub fn threshold_cam(plane: ScorePlane<'_>, t: f64) -> Result<BinaryMask> {
    check_threshold("threshold", t)?;
    Ok(BinaryMask {
        width: plane.width,
        height: plane.height,
        bits: plane.scores.iter().map(|&s| f64::from(s) > t).collect(),
    })
}

/// Simplify, flatten, and trace the region boundaries of `image`.
pub fn build_perimeter_map(
    image: &RasterImage,
    simplify_params: &SimplifyParams,
    canny_params: &CannyParams,
) -> Result<PerimeterMap> {
    canny_params.validate()?;
    let seg = simplify(image, simplify_params)?;
    let flat = flatten(image, &seg)?;
    canny(&flat, canny_params)
}

fn check_refine_inputs(mask: &BinaryMask, pm: &PerimeterMap, plane: ScorePlane<'_>) -> Result<()> {
    check_same_dims(mask.dims(), pm.dims())?;
    check_same_dims(mask.dims(), plane.dims())
}

fn is_seed(mask: &BinaryMask, plane: ScorePlane<'_>, t: f64, p: usize) -> bool {
    !mask.bits[p] || f64::from(plane.scores[p]) <= t
}

/// Clears every target cluster that contains a background pixel.
///
/// A pixel is background when it is off in `mask` or scores `<= t`. Non-edge
/// pixels keep their cluster's verdict. Each edge pixel is then foreground
/// iff strictly more of its non-edge 8-neighbors are foreground than
/// background.
pub fn refine_class(
    mask: &BinaryMask,
    pm: &PerimeterMap,
    plane: ScorePlane<'_>,
    t: f64,
) -> Result<BinaryMask> {
    check_refine_inputs(mask, pm, plane)?;
    let (w, h) = mask.dims();
    let n = w * h;

    let mut cluster = vec![usize::MAX; n];
    let mut poisoned = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if cluster[start] != usize::MAX || pm.is_edge_index(start) {
            continue;
        }
        let id = poisoned.len();
        let mut has_seed = false;
        cluster[start] = id;
        stack.push(start);
        while let Some(p) = stack.pop() {
            has_seed |= is_seed(mask, plane, t, p);
            for q in crate::superpixels::neighbors4(p, w, h) {
                if cluster[q] == usize::MAX && !pm.is_edge_index(q) {
                    cluster[q] = id;
                    stack.push(q);
                }
            }
        }
        poisoned.push(has_seed);
    }

    let mut bits: Vec<bool> = cluster
        .iter()
        .map(|&c| c != usize::MAX && !poisoned[c])
        .collect();
    resolve_edge_pixels(&mut bits, pm);
    Ok(BinaryMask {
        width: w,
        height: h,
        bits,
    })
}

fn resolve_edge_pixels(bits: &mut [bool], pm: &PerimeterMap) {
    let (w, h) = pm.dims();
    let resolved: Vec<(usize, bool)> = (0..w * h)
        .filter(|&p| pm.is_edge_index(p))
        .map(|p| {
            let (x, y) = ((p % w) as isize, (p / w) as isize);
            let (mut fg, mut bg) = (0u32, 0u32);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    if pm.is_edge_index(q) {
                        continue;
                    }
                    if bits[q] {
                        fg += 1;
                    } else {
                        bg += 1;
                    }
                }
            }
            (p, fg > bg)
        })
        .collect();
    for (p, v) in resolved {
        bits[p] = v;
    }
}

/// Literal flood fill: start from every non-edge background pixel and clear
/// foreground through non-edge 4-neighbors until blocked by edges.
///
/// Edge pixels keep their thresholded input value. On non-edge pixels the
/// result equals [`refine_class`].
pub fn floodfill_reference(
    mask: &BinaryMask,
    pm: &PerimeterMap,
    plane: ScorePlane<'_>,
    t: f64,
) -> Result<BinaryMask> {
    check_refine_inputs(mask, pm, plane)?;
    let (w, h) = mask.dims();
    let n = w * h;
    let mut out: Vec<bool> = (0..n).map(|p| !is_seed(mask, plane, t, p)).collect();
    let mut visited = vec![false; n];
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if visited[seed] || pm.is_edge_index(seed) || out[seed] {
            continue;
        }
        visited[seed] = true;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            out[p] = false;
            for q in crate::superpixels::neighbors4(p, w, h) {
                if !visited[q] && !pm.is_edge_index(q) {
                    visited[q] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    Ok(BinaryMask {
        width: w,
        height: h,
        bits: out,
    })
}

fn fuse(fusion: Fusion, slic: Option<&BinaryMask>, quick: Option<&BinaryMask>) -> Result<BinaryMask> {
    let (s, q) = (slic, quick);
    match fusion {
        Fusion::Union => s.unwrap().union(q.unwrap()),
        Fusion::Intersection => s.unwrap().intersection(q.unwrap()),
        Fusion::SlicOnly => Ok(s.unwrap().clone()),
        Fusion::QuickOnly => Ok(q.unwrap().clone()),
    }
}

fn check_class_ids(scores: &ScoreMap) -> Result<()> {
    match scores
        .class_ids()
        .iter()
        .find(|&&c| c == 0 || c == IGNORE_LABEL)
    {
        Some(&c) => Err(Error::ReservedClassId(c)),
        None => Ok(()),
    }
}

/// Assigns each pixel the class with the highest raw score among the classes
/// whose mask is foreground there (lower class id on equal scores), or `0`.
pub fn label_from_masks(scores: &ScoreMap, masks: &[BinaryMask]) -> Result<LabelMap> {
    check_class_ids(scores)?;
    let (w, h) = scores.dims();
    let mut labels = vec![0u8; w * h];
    let mut best = vec![f32::NEG_INFINITY; w * h];
    for (i, mask) in masks.iter().enumerate() {
        check_same_dims(mask.dims(), (w, h))?;
        let id = scores.class_ids()[i];
        for (p, &on) in mask.bits.iter().enumerate() {
            if !on {
                continue;
            }
            let s = scores.plane(i)[p];
            if s > best[p] || (s == best[p] && id < labels[p]) {
                best[p] = s;
                labels[p] = id;
            }
        }
    }
    LabelMap::new(w, h, labels)
}

/// Per-class masks after thresholding alone, fused like
/// [`refine_multiclass`] fuses refined masks.
pub fn threshold_masks(scores: &ScoreMap, params: &RefineParams) -> Result<Vec<BinaryMask>> {
    params.validate()?;
    (0..scores.num_classes())
        .map(|i| {
            let plane = ScorePlane::of(scores, i);
            let s = threshold_cam(plane, params.threshold_slic)?;
            let q = threshold_cam(plane, params.threshold_quick)?;
            fuse(params.fusion, Some(&s), Some(&q))
        })
        .collect()
}

/// Per-class refined and fused masks, in plane order.
pub fn refine_masks(
    scores: &ScoreMap,
    pm_slic: &PerimeterMap,
    pm_quick: &PerimeterMap,
    params: &RefineParams,
) -> Result<Vec<BinaryMask>> {
    params.validate()?;
    check_class_ids(scores)?;
    check_same_dims(scores.dims(), pm_slic.dims())?;
    check_same_dims(scores.dims(), pm_quick.dims())?;
    let need_slic = params.fusion != Fusion::QuickOnly;
    let need_quick = params.fusion != Fusion::SlicOnly;
    (0..scores.num_classes())
        .map(|i| {
            let plane = ScorePlane::of(scores, i);
            let slic = if need_slic {
                let t = params.threshold_slic;
                Some(refine_class(&threshold_cam(plane, t)?, pm_slic, plane, t)?)
            } else {
                None
            };
            let quick = if need_quick {
                let t = params.threshold_quick;
                Some(refine_class(&threshold_cam(plane, t)?, pm_quick, plane, t)?)
            } else {
                None
            };
            fuse(params.fusion, slic.as_ref(), quick.as_ref())
        })
        .collect()
}

/// Refines every class plane against both perimeter maps, fuses the two
/// variants, and resolves overlaps by raw score.
pub fn refine_multiclass(
    scores: &ScoreMap,
    pm_slic: &PerimeterMap,
    pm_quick: &PerimeterMap,
    params: &RefineParams,
) -> Result<LabelMap> {
    let masks = refine_masks(scores, pm_slic, pm_quick, params)?;
    label_from_masks(scores, &masks)
}

/// Labels from thresholding alone, the baseline refinement starts from.
pub fn threshold_multiclass(scores: &ScoreMap, params: &RefineParams) -> Result<LabelMap> {
    let masks = threshold_masks(scores, params)?;
    label_from_masks(scores, &masks)
}
