//! Image simplification into a capped number of color-coherent clusters.
//!
//! [`simplify`] runs one over-segmentation method ([`slic`] or
//! [`quickshift`]), makes every segment 4-connected, and merges segments
//! with [`merge_to_cap`] until at most `q` remain. [`flatten`] then paints
//! every segment with its mean color, producing the simplified image that
//! edge detection runs on.

mod connectivity;
mod merge;
mod quickshift;
mod slic;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_same_dims, Error, Result};
use crate::image::RasterImage;

pub use connectivity::enforce_connectivity;
pub use merge::merge_to_cap;
pub use quickshift::{quickshift, quickshift_forest, QuickshiftForest};
pub use slic::{slic, slic_with_energy};

/// Per-pixel segment ids forming the contiguous range `[0, num_segments)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    width: usize,
    height: usize,
    segments: Vec<u32>,
    num_segments: usize,
}

impl SegmentMap {
    /// Wraps an id raster, checking that ids cover `[0, num_segments)`
    /// without gaps.
    pub fn new(width: usize, height: usize, segments: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 || segments.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height} segment map with {} ids",
                segments.len()
            )));
        }
        let num_segments = segments.iter().max().map_or(0, |&m| m as usize + 1);
        let mut seen = vec![false; num_segments];
        for &s in &segments {
            seen[s as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidDimensions(format!(
                "segment id {missing} is unused; ids must be contiguous"
            )));
        }
        Ok(Self {
            width,
            height,
            segments,
            num_segments,
        })
    }

    /// Builds a map from arbitrary labels, renumbering them in order of first
    /// appearance in raster order.
    pub fn from_labels(width: usize, height: usize, labels: &[usize]) -> Result<Self> {
        if width == 0 || height == 0 || labels.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height} segment map with {} labels",
                labels.len()
            )));
        }
        let bound = labels.iter().max().map_or(0, |&m| m + 1);
        let mut remap = vec![u32::MAX; bound];
        let mut next = 0u32;
        let segments = labels
            .iter()
            .map(|&l| {
                if remap[l] == u32::MAX {
                    remap[l] = next;
                    next += 1;
                }
                remap[l]
            })
            .collect();
        Ok(Self {
            width,
            height,
            segments,
            num_segments: next as usize,
        })
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

    pub fn segments(&self) -> &[u32] {
        &self.segments
    }

    pub fn num_segments(&self) -> usize {
        self.num_segments
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.segments[y * self.width + x]
    }

    /// Pixel count of every segment.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_segments];
        for &s in &self.segments {
            sizes[s as usize] += 1;
        }
        sizes
    }

    /// True when every segment is a single 4-connected region.
    pub fn is_4_connected(&self) -> bool {
        let (w, h) = (self.width, self.height);
        let mut visited = vec![false; w * h];
        let mut seen_segment = vec![false; self.num_segments];
        let mut stack = Vec::new();
        for start in 0..w * h {
            if visited[start] {
                continue;
            }
            let id = self.segments[start];
            if seen_segment[id as usize] {
                return false;
            }
            seen_segment[id as usize] = true;
            visited[start] = true;
            stack.push(start);
            while let Some(p) = stack.pop() {
                for q in neighbors4(p, w, h) {
                    if !visited[q] && self.segments[q] == id {
                        visited[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        true
    }
}

/// Over-segmentation method feeding [`simplify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Slic,
    Quickshift,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Slic => "slic",
            Method::Quickshift => "quickshift",
        }
    }
}

/// Parameters of the simplification stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimplifyParams {
    pub method: Method,
    /// Upper bound on the number of clusters after merging.
    pub q: usize,
    /// Number of SLIC seeds before merging.
    pub slic_k: usize,
    pub slic_compactness: f64,
    pub slic_iters: usize,
    /// Gaussian bandwidth of the Quickshift density estimate.
    pub qs_kernel_size: f64,
    /// Spatial window and maximum joint link distance of Quickshift.
    pub qs_max_dist: f64,
    /// Recorded in run headers; SLIC and Quickshift are deterministic.
    pub rng_seed: u64,
}

impl Default for SimplifyParams {
    fn default() -> Self {
        Self {
            method: Method::Slic,
            q: 32,
            slic_k: 256,
            slic_compactness: 10.0,
            slic_iters: 10,
            qs_kernel_size: 5.0,
            qs_max_dist: 10.0,
            rng_seed: 0,
        }
    }
}

impl SimplifyParams {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::InvalidParameter(format!("q = {} < 2", self.q)));
        }
        if self.slic_k < self.q {
            return Err(Error::InvalidParameter(format!(
                "slic_k = {} < q = {}",
                self.slic_k, self.q
            )));
        }
        if self.slic_iters == 0 {
            return Err(Error::InvalidParameter("slic_iters must be >= 1".into()));
        }
        for (name, v) in [
            ("slic_compactness", self.slic_compactness),
            ("qs_kernel_size", self.qs_kernel_size),
            ("qs_max_dist", self.qs_max_dist),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Full simplification: over-segment, enforce connectivity, merge down to
/// `q` segments.
pub fn simplify(image: &RasterImage, params: &SimplifyParams) -> Result<SegmentMap> {
    params.validate()?;
    let seg = match params.method {
        Method::Slic => slic(image, params)?,
        Method::Quickshift => enforce_connectivity(&quickshift(image, params)?),
    };
    merge_to_cap(image, &seg, params.q)
}

/// Replaces every pixel by the mean RGB of its segment, rounding half up.
pub fn flatten(image: &RasterImage, seg: &SegmentMap) -> Result<RasterImage> {
    check_same_dims(image.dims(), seg.dims())?;
    let mut sums = vec![[0u64; 3]; seg.num_segments];
    let mut counts = vec![0u64; seg.num_segments];
    for (rgb, &s) in image.pixels().zip(&seg.segments) {
        let s = s as usize;
        for c in 0..3 {
            sums[s][c] += u64::from(rgb[c]);
        }
        counts[s] += 1;
    }
    let means: Vec<[u8; 3]> = sums
        .iter()
        .zip(&counts)
        .map(|(sum, &n)| {
            let mut m = [0u8; 3];
            if n > 0 {
                for c in 0..3 {
                    m[c] = ((2 * sum[c] + n) / (2 * n)) as u8;
                }
            }
            m
        })
        .collect();
    let data = seg
        .segments
        .iter()
        .flat_map(|&s| means[s as usize])
        .collect();
    RasterImage::new(image.width(), image.height(), data)
}

/// In-bounds 4-neighbors of pixel index `p`, in the order left, right, up, down.
pub(crate) fn neighbors4(p: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (p % w, p / w);
    let left = (x > 0).then(|| p - 1);
    let right = (x + 1 < w).then(|| p + 1);
    let up = (y > 0).then(|| p - w);
    let down = (y + 1 < h).then(|| p + w);
    [left, right, up, down].into_iter().flatten()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_rounds_half_up() {
        let img = RasterImage::new(2, 1, vec![0, 0, 0, 255, 255, 255]).unwrap();
        let seg = SegmentMap::new(2, 1, vec![0, 0]).unwrap();
        let flat = flatten(&img, &seg).unwrap();
        assert_eq!(flat.as_bytes(), &[128; 6]);
    }

    #[test]
    fn flatten_single_segment_and_solid_segments() {
        let img = RasterImage::from_fn(4, 4, |x, _| if x < 2 { [10, 20, 30] } else { [200, 0, 9] })
            .unwrap();
        let halves = SegmentMap::from_labels(4, 4, &(0..16).map(|i| (i % 4) / 2).collect::<Vec<_>>())
            .unwrap();
        assert_eq!(flatten(&img, &halves).unwrap(), img);
        let one = SegmentMap::new(4, 4, vec![0; 16]).unwrap();
        // mean of 8x(10,20,30) and 8x(200,0,9): (105, 10, 19.5 -> 20)
        assert!(flatten(&img, &one).unwrap().pixels().all(|p| p == [105, 10, 20]));
    }

    #[test]
    fn flatten_dimension_mismatch() {
        let img = RasterImage::filled(2, 2, [0, 0, 0]).unwrap();
        let seg = SegmentMap::new(2, 1, vec![0, 0]).unwrap();
        assert!(flatten(&img, &seg).is_err());
    }

    #[test]
    fn segment_map_requires_contiguous_ids() {
        assert!(SegmentMap::new(3, 1, vec![0, 2, 2]).is_err());
        let m = SegmentMap::from_labels(3, 1, &[7, 2, 7]).unwrap();
        assert_eq!(m.segments(), &[0, 1, 0]);
        assert_eq!(m.num_segments(), 2);
        assert!(!m.is_4_connected());
    }

    #[test]
    fn params_validation() {
        assert!(SimplifyParams::default().validate().is_ok());
        let bad = SimplifyParams {
            q: 1,
            ..SimplifyParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimplifyParams {
            slic_k: 8,
            q: 16,
            ..SimplifyParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimplifyParams {
            qs_max_dist: 0.0,
            ..SimplifyParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
