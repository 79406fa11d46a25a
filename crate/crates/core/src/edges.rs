//! Canny edge detection producing binary perimeter maps.
//!
//! Stages: luma conversion, separable Gaussian blur, 3x3 Sobel gradients,
//! non-maximum suppression along the quantized gradient direction, and
//! hysteresis thresholding with thresholds relative to the largest gradient.
//! Borders are handled by reflection (`d c b a | a b c d`) in every stage.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_same_dims, Error, Result};
use crate::image::{rgb_to_lab, Plane, RasterImage};

/// Edge value in a [`PerimeterMap`].
pub const EDGE: u8 = 255;

/// Binary edge map: `255` on edges, `0` elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerimeterMap {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl PerimeterMap {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{width}x{height} perimeter map with {} values",
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|&v| v != 0 && v != EDGE) {
            return Err(Error::InvalidPerimeterValue {
                index,
                value: values[index],
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0; width * height],
        }
    }

    pub fn from_edges(width: usize, height: usize, edges: &[bool]) -> Self {
        Self {
            width,
            height,
            values: edges.iter().map(|&e| if e { EDGE } else { 0 }).collect(),
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

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn is_edge(&self, x: usize, y: usize) -> bool {
        self.values[y * self.width + x] == EDGE
    }

    pub fn is_edge_index(&self, i: usize) -> bool {
        self.values[i] == EDGE
    }

    pub fn edge_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == EDGE).count()
    }
}

/// Grayscale source for [`canny`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrayMode {
    /// `0.299 R + 0.587 G + 0.114 B`
    Luma,
    /// CIELAB lightness scaled to `[0, 255]`.
    Lightness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CannyParams {
    /// Gaussian standard deviation in pixels.
    pub sigma: f64,
    /// Weak threshold as a fraction of the largest gradient magnitude.
    pub low: f64,
    /// Strong threshold as a fraction of the largest gradient magnitude.
    pub high: f64,
    pub gray: GrayMode,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self {
            sigma: 1.4,
            low: 0.1,
            high: 0.2,
            gray: GrayMode::Luma,
        }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma = {}", self.sigma)));
        }
        if !(0.0 < self.low && self.low < self.high && self.high <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < low < high <= 1, got low = {} high = {}",
                self.low, self.high
            )));
        }
        Ok(())
    }
}

/// Reflects an out-of-range index back into `[0, n)`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Normalized 1-D Gaussian taps `k[0..=r]` for offsets `0..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = libm::ceil(3.0 * sigma) as usize;
    let mut taps: Vec<f64> = (0..=radius)
        .map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let total = taps[0] + 2.0 * taps[1..].iter().sum::<f64>();
    for t in &mut taps {
        *t /= total;
    }
    taps
}

// Taps are paired symmetrically so that mirroring the input mirrors the
// output bit for bit.
fn convolve_rows(src: &Plane, taps: &[f64]) -> Plane {
    let (w, h) = src.dims();
    Plane::from_fn(w, h, |x, y| {
        let row = &src.data[y * w..(y + 1) * w];
        let mut acc = taps[0] * row[x];
        for (i, &t) in taps.iter().enumerate().skip(1) {
            let l = row[reflect(x as isize - i as isize, w)];
            let r = row[reflect(x as isize + i as isize, w)];
            acc += t * (l + r);
        }
        acc
    })
}

fn convolve_cols(src: &Plane, taps: &[f64]) -> Plane {
    let (w, h) = src.dims();
    Plane::from_fn(w, h, |x, y| {
        let mut acc = taps[0] * src.get(x, y);
        for (i, &t) in taps.iter().enumerate().skip(1) {
            let u = src.get(x, reflect(y as isize - i as isize, h));
            let d = src.get(x, reflect(y as isize + i as isize, h));
            acc += t * (u + d);
        }
        acc
    })
}

/// Separable Gaussian blur with radius `ceil(3 sigma)` and reflected borders.
///
/// The result averages the row-first and column-first passes so it commutes
/// exactly with transposition and 90 degree rotation.
pub fn gaussian_blur(gray: &Plane, sigma: f64) -> Result<Plane> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma = {sigma}")));
    }
    let taps = gaussian_kernel(sigma);
    let a = convolve_cols(&convolve_rows(gray, &taps), &taps);
    let b = convolve_rows(&convolve_cols(gray, &taps), &taps);
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| 0.5 * (x + y))
        .collect();
    Plane::new(gray.width, gray.height, data)
}

/// Sobel gradient magnitude and orientation (`atan2(gy, gx)`, radians).
///
/// `gx` uses the kernel `[-1 0 1; -2 0 2; -1 0 1]`, `gy` its transpose, so
/// `gy` grows downward.
pub fn sobel_gradients(plane: &Plane) -> Result<(Plane, Plane)> {
    let (w, h) = plane.dims();
    if w < 3 || h < 3 {
        return Err(Error::InvalidDimensions(format!(
            "Sobel needs at least 3x3, got {w}x{h}"
        )));
    }
    let at = |x: isize, y: isize| plane.get(reflect(x, w), reflect(y, h));
    let mut magnitude = Plane::filled(w, h, 0.0);
    let mut orientation = Plane::filled(w, h, 0.0);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = ((at(x + 1, y - 1) - at(x - 1, y - 1)) + (at(x + 1, y + 1) - at(x - 1, y + 1)))
                + 2.0 * (at(x + 1, y) - at(x - 1, y));
            let gy = ((at(x - 1, y + 1) - at(x - 1, y - 1)) + (at(x + 1, y + 1) - at(x + 1, y - 1)))
                + 2.0 * (at(x, y + 1) - at(x, y - 1));
            let i = y as usize * w + x as usize;
            magnitude.data[i] = libm::sqrt(gx * gx + gy * gy);
            orientation.data[i] = libm::atan2(gy, gx);
        }
    }
    Ok((magnitude, orientation))
}

/// Unit step `(dx, dy)` toward the neighbor along the gradient, quantized
/// to the eight 45 degree sectors (axes 0, 45, 90, 135 plus sign).
fn quantized_step(angle: f64) -> (isize, isize) {
    const STEPS: [(isize, isize); 8] = [
        (1, 0),
        (1, 1),
        (0, 1),
        (-1, 1),
        (-1, 0),
        (-1, -1),
        (0, -1),
        (1, -1),
    ];
    let sector = libm::round(angle * 4.0 / PI) as i32;
    STEPS[sector.rem_euclid(8) as usize]
}

/// Thins ridges to one pixel along the gradient direction.
///
/// The orientation is quantized to 0, 45, 90, or 135 degrees. A pixel survives
/// when its magnitude is at least that of the neighbor behind it and strictly
/// greater than that of the neighbor ahead of it, "ahead" meaning the
/// direction of increasing intensity. Two equal pixels straddling an edge
/// therefore keep only the one on the brighter side.
pub fn non_max_suppression(magnitude: &Plane, orientation: &Plane) -> Result<Plane> {
    check_same_dims(magnitude.dims(), orientation.dims())?;
    let (w, h) = magnitude.dims();
    let at = |x: isize, y: isize| magnitude.get(reflect(x, w), reflect(y, h));
    let mut out = Plane::filled(w, h, 0.0);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let m = magnitude.data[i];
            if m <= 0.0 {
                continue;
            }
            let (dx, dy) = quantized_step(orientation.data[i]);
            let ahead = at(x + dx, y + dy);
            let behind = at(x - dx, y - dy);
            if m >= behind && m > ahead {
                out.data[i] = m;
            }
        }
    }
    Ok(out)
}

/// Hysteresis: pixels at or above `high_abs` seed edges that grow through
/// 8-connected pixels at or above `low_abs`.
pub fn hysteresis(suppressed: &Plane, low_abs: f64, high_abs: f64) -> Result<PerimeterMap> {
    if !(0.0 < low_abs && low_abs < high_abs) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < low < high, got {low_abs} and {high_abs}"
        )));
    }
    let (w, h) = suppressed.dims();
    let mut edge = vec![false; w * h];
    let mut stack = Vec::new();
    for seed in 0..w * h {
        if edge[seed] || suppressed.data[seed] < high_abs {
            continue;
        }
        edge[seed] = true;
        stack.push(seed);
        while let Some(p) = stack.pop() {
            let (x, y) = ((p % w) as isize, (p / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    if !edge[q] && suppressed.data[q] >= low_abs {
                        edge[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
    }
    Ok(PerimeterMap::from_edges(w, h, &edge))
}

/// Grayscale plane fed to [`canny`].
pub fn gray_plane(image: &RasterImage, mode: GrayMode) -> Plane {
    match mode {
        GrayMode::Luma => image.luma(),
        GrayMode::Lightness => {
            let lab = rgb_to_lab(image);
            Plane {
                width: lab.width,
                height: lab.height,
                data: lab.data.iter().map(|p| p[0] * 2.55).collect(),
            }
        }
    }
}

/// Full Canny pipeline; thresholds are `low` and `high` times the largest
/// gradient magnitude. A zero-gradient image yields an empty map.
pub fn canny(image: &RasterImage, params: &CannyParams) -> Result<PerimeterMap> {
    params.validate()?;
    let gray = gray_plane(image, params.gray);
    let (w, h) = gray.dims();
    if w < 3 || h < 3 {
        return Ok(PerimeterMap::empty(w, h));
    }
    let blurred = gaussian_blur(&gray, params.sigma)?;
    let (magnitude, orientation) = sobel_gradients(&blurred)?;
    let max = magnitude.max();
    if !(max > 0.0) {
        return Ok(PerimeterMap::empty(w, h));
    }
    let thin = non_max_suppression(&magnitude, &orientation)?;
    hysteresis(&thin, params.low * max, params.high * max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(-2, 5), 1);
        assert_eq!(reflect(5, 5), 4);
        assert_eq!(reflect(6, 5), 3);
        assert_eq!(reflect(-7, 3), 0);
        assert_eq!(reflect(3, 1), 0);
    }

    #[test]
    fn blur_preserves_constant() {
        let p = Plane::filled(9, 7, 42.0);
        let b = gaussian_blur(&p, 2.3).unwrap();
        assert!(b.data.iter().all(|v| (v - 42.0).abs() < 1e-6));
        // radius larger than the image
        let b = gaussian_blur(&Plane::filled(2, 2, 5.0), 3.0).unwrap();
        assert!(b.data.iter().all(|v| (v - 5.0).abs() < 1e-6));
    }

    #[test]
    fn blur_impulse_center_is_kernel_square() {
        let sigma: f64 = 1.4;
        // Oracle: the normalized 1-D kernel evaluated analytically.
        let r = 5; // ceil(4.2)
        let raw = |i: i32| (-(f64::from(i * i)) / (2.0 * sigma * sigma)).exp();
        let z: f64 = (-r..=r).map(raw).sum();
        let k0 = raw(0) / z;
        let mut p = Plane::filled(21, 21, 0.0);
        p.set(10, 10, 1.0);
        let b = gaussian_blur(&p, sigma).unwrap();
        assert!((b.get(10, 10) - k0 * k0).abs() < 1e-12);
        assert!((b.get(11, 10) - k0 * raw(1) / z).abs() < 1e-12);
    }

    #[test]
    fn blur_mirror_symmetry() {
        let p = Plane::from_fn(11, 6, |x, y| ((x * 7 + y * 13) % 17) as f64);
        let mirrored = Plane::from_fn(11, 6, |x, y| p.get(10 - x, y));
        let a = gaussian_blur(&p, 1.1).unwrap();
        let b = gaussian_blur(&mirrored, 1.1).unwrap();
        for y in 0..6 {
            for x in 0..11 {
                assert_eq!(a.get(x, y), b.get(10 - x, y));
            }
        }
    }

    #[test]
    fn sobel_constant_and_step() {
        let (m, _) = sobel_gradients(&Plane::filled(5, 5, 3.0)).unwrap();
        assert!(m.data.iter().all(|&v| v == 0.0));

        let step = Plane::from_fn(10, 6, |x, _| if x < 5 { 0.0 } else { 255.0 });
        let (m, o) = sobel_gradients(&step).unwrap();
        for y in 0..6 {
            assert_eq!(m.get(4, y), 1020.0);
            assert_eq!(m.get(5, y), 1020.0);
            assert_eq!(o.get(4, y), 0.0);
            for x in (0..4).chain(6..10) {
                assert_eq!(m.get(x, y), 0.0);
            }
        }
        assert!(sobel_gradients(&Plane::filled(2, 5, 0.0)).is_err());
    }

    #[test]
    fn sobel_diagonal_ramp() {
        let ramp = Plane::from_fn(8, 8, |x, y| (x + y) as f64);
        let (m, o) = sobel_gradients(&ramp).unwrap();
        for y in 1..7 {
            for x in 1..7 {
                assert!((o.get(x, y) - PI / 4.0).abs() < 1e-12);
                assert!((m.get(x, y) - 8.0 * 2f64.sqrt()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quantized_steps_cover_all_directions() {
        let deg = |d: f64| d * PI / 180.0;
        assert_eq!(quantized_step(deg(0.0)), (1, 0));
        assert_eq!(quantized_step(deg(180.0)), (-1, 0));
        assert_eq!(quantized_step(deg(-180.0)), (-1, 0));
        assert_eq!(quantized_step(deg(45.0)), (1, 1));
        assert_eq!(quantized_step(deg(-135.0)), (-1, -1));
        assert_eq!(quantized_step(deg(90.0)), (0, 1));
        assert_eq!(quantized_step(deg(-90.0)), (0, -1));
        assert_eq!(quantized_step(deg(135.0)), (-1, 1));
        assert_eq!(quantized_step(deg(-45.0)), (1, -1));
        assert_eq!(quantized_step(deg(10.0)), (1, 0));
        assert_eq!(quantized_step(deg(-170.0)), (-1, 0));
        assert_eq!(quantized_step(deg(170.0)), (-1, 0));
    }

    fn columns(w: usize, h: usize, col: impl Fn(usize) -> f64) -> Plane {
        Plane::from_fn(w, h, |x, _| col(x))
    }

    #[test]
    fn nms_keeps_single_ridge() {
        let m = columns(8, 4, |x| if x == 3 { 5.0 } else { 1.0 });
        let o = Plane::filled(8, 4, 0.0);
        let out = non_max_suppression(&m, &o).unwrap();
        for y in 0..4 {
            for x in 0..8 {
                assert_eq!(out.get(x, y), if x == 3 { 5.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn nms_equal_pair_keeps_brighter_side() {
        // Gradient points toward +x, so column 4 lies on the brighter side.
        let m = columns(8, 4, |x| match x {
            3 | 4 => 9.0,
            2 | 5 => 4.0,
            _ => 0.0,
        });
        let o = Plane::filled(8, 4, 0.0);
        let out = non_max_suppression(&m, &o).unwrap();
        for y in 0..4 {
            assert_eq!(out.get(3, y), 0.0);
            assert_eq!(out.get(4, y), 9.0);
        }
        let o = Plane::filled(8, 4, PI);
        let out = non_max_suppression(&m, &o).unwrap();
        assert_eq!(out.get(3, 0), 9.0);
        assert_eq!(out.get(4, 0), 0.0);
    }

    #[test]
    fn nms_plateau_matches_brute_force() {
        // 8x8 plateau of width 4 with a strictly larger interior column.
        let m = columns(8, 8, |x| match x {
            2 | 3 | 5 => 6.0,
            4 => 7.0,
            _ => 1.0,
        });
        let o = Plane::filled(8, 8, 0.0);
        let out = non_max_suppression(&m, &o).unwrap();
        // Brute force: a pixel is a maximum if neither horizontal neighbor
        // exceeds it and its right neighbor is strictly below it.
        for y in 0..8 {
            for x in 0..8usize {
                let v = m.get(x, y);
                let l = m.get(x.saturating_sub(1), y);
                let r = m.get((x + 1).min(7), y);
                let expect = if v >= l && v > r { v } else { 0.0 };
                assert_eq!(out.get(x, y), expect);
            }
            assert_eq!(out.get(4, y), 7.0);
            assert_eq!((0..8).filter(|&x| out.get(x, y) > 1.0).count(), 1);
        }
    }

    #[test]
    fn hysteresis_rules() {
        let mut p = Plane::filled(6, 6, 0.0);
        assert_eq!(hysteresis(&p, 1.0, 2.0).unwrap().edge_count(), 0);
        // strong seed with a weak diagonal chain
        p.set(0, 0, 3.0);
        p.set(1, 1, 1.5);
        p.set(2, 2, 1.0);
        // isolated weak blob
        p.set(5, 0, 1.5);
        p.set(5, 1, 1.5);
        let pm = hysteresis(&p, 1.0, 2.0).unwrap();
        assert!(pm.is_edge(0, 0) && pm.is_edge(1, 1) && pm.is_edge(2, 2));
        assert!(!pm.is_edge(5, 0) && !pm.is_edge(5, 1));
        assert_eq!(pm.edge_count(), 3);
        assert!(hysteresis(&p, 2.0, 1.0).is_err());
        assert!(hysteresis(&p, 0.0, 1.0).is_err());
    }

    #[test]
    fn canny_constant_image_is_empty() {
        let img = RasterImage::filled(16, 16, [90, 30, 200]).unwrap();
        assert_eq!(canny(&img, &CannyParams::default()).unwrap().edge_count(), 0);
    }

    #[test]
    fn perimeter_map_rejects_other_values() {
        assert!(PerimeterMap::new(2, 1, vec![0, 255]).is_ok());
        assert_eq!(
            PerimeterMap::new(2, 1, vec![0, 7]),
            Err(Error::InvalidPerimeterValue { index: 1, value: 7 })
        );
    }

    #[test]
    fn params_validation() {
        assert!(CannyParams::default().validate().is_ok());
        let bad = CannyParams {
            low: 0.3,
            high: 0.2,
            ..CannyParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
