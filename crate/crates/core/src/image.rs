//! Pixel grids shared by every stage: RGB rasters, label maps, class score
//! maps, real-valued planes, and the sRGB to CIELAB conversion.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_same_dims, Error, Result};

/// Label value excluded from every metric.
pub const IGNORE_LABEL: u8 = 255;

/// Maps a class id to the RGB color used when drawing it.
pub type Palette = BTreeMap<u8, [u8; 3]>;

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions(format!(
            "{width}x{height} grid has no pixels"
        )));
    }
    Ok(())
}

/// A `(column, row)` position inside a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

impl PixelCoord {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn from_index(index: usize, width: usize) -> Self {
        Self {
            x: index % width,
            y: index / width,
        }
    }

    pub fn index(self, width: usize) -> usize {
        self.y * width + self.x
    }
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height * 3 {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let data = color
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            data,
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

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// Luma plane using the Rec. 601 weights `0.299 R + 0.587 G + 0.114 B`.
    pub fn luma(&self) -> Plane {
        let data = self
            .pixels()
            .map(|[r, g, b]| 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b))
            .collect();
        Plane {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Row-major per-pixel class ids. `255` marks ignored pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if labels.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height} label map needs {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, label: u8) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            labels: vec![label; width * height],
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

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u8) {
        self.labels[y * self.width + x] = label;
    }

    /// Checks that every label is a valid class id or the ignore value.
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        match self
            .labels
            .iter()
            .position(|&l| l != IGNORE_LABEL && usize::from(l) >= num_classes)
        {
            Some(index) => Err(Error::LabelOutOfRange {
                index,
                label: self.labels[index],
                num_classes,
            }),
            None => Ok(()),
        }
    }
}

/// Per-class activation planes with scores in `[0, 1]`.
///
/// Plane `i` belongs to dataset class `class_ids[i]`. Scores are kept as
/// `f32` so that they round-trip through files bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    width: usize,
    height: usize,
    class_ids: Vec<u8>,
    planes: Vec<Vec<f32>>,
}

impl ScoreMap {
    pub fn new(
        width: usize,
        height: usize,
        class_ids: Vec<u8>,
        planes: Vec<Vec<f32>>,
    ) -> Result<Self> {
        check_dims(width, height)?;
        if class_ids.len() != planes.len() {
            return Err(Error::InvalidDimensions(format!(
                "{} class ids for {} planes",
                class_ids.len(),
                planes.len()
            )));
        }
        for (i, id) in class_ids.iter().enumerate() {
            if class_ids[..i].contains(id) {
                return Err(Error::DuplicateClassId(*id));
            }
        }
        for (p, plane) in planes.iter().enumerate() {
            if plane.len() != width * height {
                return Err(Error::InvalidDimensions(format!(
                    "plane {p} has {} scores, expected {}",
                    plane.len(),
                    width * height
                )));
            }
            for (index, &s) in plane.iter().enumerate() {
                if !s.is_finite() {
                    return Err(Error::NonFiniteScore { plane: p, index });
                }
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::ScoreOutOfRange { plane: p, index });
                }
            }
        }
        Ok(Self {
            width,
            height,
            class_ids,
            planes,
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

    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn class_ids(&self) -> &[u8] {
        &self.class_ids
    }

    pub fn plane(&self, i: usize) -> &[f32] {
        &self.planes[i]
    }

    pub fn planes(&self) -> &[Vec<f32>] {
        &self.planes
    }

    pub fn plane_for_class(&self, class_id: u8) -> Option<&[f32]> {
        self.class_ids
            .iter()
            .position(|&c| c == class_id)
            .map(|i| self.planes[i].as_slice())
    }

    /// Keeps only the planes whose class id appears in `class_ids`, in the
    /// order given.
    pub fn select(&self, class_ids: &[u8]) -> Option<ScoreMap> {
        let mut planes = Vec::with_capacity(class_ids.len());
        for &c in class_ids {
            planes.push(self.plane_for_class(c)?.to_vec());
        }
        Some(ScoreMap {
            width: self.width,
            height: self.height,
            class_ids: class_ids.to_vec(),
            planes,
        })
    }
}

/// Row-major plane of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height} plane needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// CIELAB image, one `[L, a, b]` triple per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; 3]>,
}

impl LabImage {
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }
}

// D65 reference white.
const XN: f64 = 0.950_47;
const YN: f64 = 1.0;
const ZN: f64 = 1.088_83;

fn srgb_to_linear(c: u8) -> f64 {
    let c = f64::from(c) / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        libm::pow((c + 0.055) / 1.055, 2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        libm::cbrt(t)
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Converts one sRGB pixel to CIELAB under the D65 white point.
pub fn rgb_pixel_to_lab([r, g, b]: [u8; 3]) -> [f64; 3] {
    let (r, g, b) = (srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b));
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let (fx, fy, fz) = (lab_f(x / XN), lab_f(y / YN), lab_f(z / ZN));
    let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
    [l, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// sRGB to CIE-XYZ (D65) to CIELAB for every pixel.
pub fn rgb_to_lab(image: &RasterImage) -> LabImage {
    LabImage {
        width: image.width,
        height: image.height,
        data: image.pixels().map(rgb_pixel_to_lab).collect(),
    }
}

/// Blends each labeled pixel 50/50 with its palette color, rounding half up.
///
/// Background (`0`) and ignored (`255`) pixels are copied unchanged.
pub fn render_overlay(
    image: &RasterImage,
    mask: &LabelMap,
    palette: &Palette,
) -> Result<RasterImage> {
    check_same_dims(image.dims(), mask.dims())?;
    let mut out = image.clone();
    for (i, &label) in mask.labels.iter().enumerate() {
        if label == 0 || label == IGNORE_LABEL {
            continue;
        }
        let color = palette
            .get(&label)
            .ok_or(Error::MissingPaletteEntry(label))?;
        for c in 0..3 {
            let v = u16::from(image.data[i * 3 + c]) + u16::from(color[c]) + 1;
            out.data[i * 3 + c] = (v / 2) as u8;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lab_black_and_white() {
        assert_eq!(rgb_pixel_to_lab([0, 0, 0]), [0.0, 0.0, 0.0]);
        let [l, a, b] = rgb_pixel_to_lab([255, 255, 255]);
        assert!((l - 100.0).abs() < 1e-3, "L = {l}");
        assert!(a.abs() < 0.01 && b.abs() < 0.01, "a = {a}, b = {b}");
    }

    #[test]
    fn lab_gray_is_neutral_and_monotone() {
        let [_, a, b] = rgb_pixel_to_lab([128, 128, 128]);
        assert!(a.abs() < 0.01 && b.abs() < 0.01);
        let mut last = -1.0;
        for g in 0..=255u8 {
            let [l, _, _] = rgb_pixel_to_lab([g, g, g]);
            assert!(l > last, "L not increasing at {g}");
            last = l;
        }
    }

    #[test]
    fn overlay_noop_on_background() {
        let img = RasterImage::from_fn(3, 2, |x, y| [x as u8 * 40, y as u8 * 90, 7]).unwrap();
        let mask = LabelMap::filled(3, 2, 0).unwrap();
        let out = render_overlay(&img, &mask, &Palette::new()).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn overlay_red_over_black_rounds_half_up() {
        let img = RasterImage::filled(4, 4, [0, 0, 0]).unwrap();
        let mask = LabelMap::filled(4, 4, 1).unwrap();
        let palette = Palette::from([(1, [255, 0, 0])]);
        let out = render_overlay(&img, &mask, &palette).unwrap();
        assert!(out.pixels().all(|p| p == [128, 0, 0]));
    }

    #[test]
    fn overlay_errors() {
        let img = RasterImage::filled(4, 4, [0, 0, 0]).unwrap();
        let mask = LabelMap::filled(4, 3, 1).unwrap();
        assert!(matches!(
            render_overlay(&img, &mask, &Palette::new()),
            Err(Error::DimensionMismatch { .. })
        ));
        let mask = LabelMap::filled(4, 4, 3).unwrap();
        assert_eq!(
            render_overlay(&img, &mask, &Palette::new()),
            Err(Error::MissingPaletteEntry(3))
        );
    }

    #[test]
    fn score_map_validation() {
        assert_eq!(
            ScoreMap::new(2, 1, vec![7], vec![vec![0.25, 1.5]]),
            Err(Error::ScoreOutOfRange { plane: 0, index: 1 })
        );
        assert_eq!(
            ScoreMap::new(2, 1, vec![7], vec![vec![f32::NAN, 0.5]]),
            Err(Error::NonFiniteScore { plane: 0, index: 0 })
        );
        assert_eq!(
            ScoreMap::new(1, 1, vec![3, 3], vec![vec![0.0], vec![0.0]]),
            Err(Error::DuplicateClassId(3))
        );
    }

    #[test]
    fn label_validation() {
        let m = LabelMap::new(3, 1, vec![0, 255, 2]).unwrap();
        assert!(m.validate(3).is_ok());
        assert!(matches!(
            m.validate(2),
            Err(Error::LabelOutOfRange { index: 2, .. })
        ));
        assert!(RasterImage::new(0, 3, vec![]).is_err());
        assert!(RasterImage::new(1, 1, vec![1, 2]).is_err());
    }
}
