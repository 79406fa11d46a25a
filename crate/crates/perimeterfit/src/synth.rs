//! Seeded synthetic corpus: textured backgrounds with solid shapes, exact
//! ground truth, and fuzzy score maps with off-object distractor blobs.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use perimeterfit_core::edges::gaussian_blur;
use perimeterfit_core::{LabelMap, Plane, RasterImage, ScoreMap};

use crate::error::{Error, Result};
use crate::manifest::{Manifest, ManifestEntry};
use crate::{fsio, netpbm, palette, smf};

/// Class ids drawn for shapes are `1..=MAX_CLASS_ID`.
pub const MAX_CLASS_ID: u8 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub image_count: usize,
    /// Side length of the square images.
    pub image_size: usize,
    pub min_shapes: usize,
    pub max_shapes: usize,
    /// Peak deviation of the background texture in gray levels.
    pub texture_amplitude: f64,
    /// Blur applied to the ground truth to form the score map; `0` keeps it
    /// binary.
    pub cam_blur_sigma: f64,
    /// Off-object activation blobs per image.
    pub distractor_blob_count: usize,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            image_count: 100,
            image_size: 128,
            min_shapes: 1,
            max_shapes: 3,
            texture_amplitude: 12.0,
            cam_blur_sigma: 2.0,
            distractor_blob_count: 2,
            rng_seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Usage(format!("synth: {m}")));
        if self.image_size < 32 {
            return bad(format!("image_size {} < 32", self.image_size));
        }
        if self.min_shapes == 0 || self.min_shapes > self.max_shapes || self.max_shapes > 3 {
            return bad(format!(
                "shape count range {}..={} outside 1..=3",
                self.min_shapes, self.max_shapes
            ));
        }
        if !(self.texture_amplitude >= 0.0 && self.texture_amplitude <= 40.0) {
            return bad(format!("texture_amplitude {} outside [0, 40]", self.texture_amplitude));
        }
        if !(self.cam_blur_sigma >= 0.0 && self.cam_blur_sigma.is_finite()) {
            return bad(format!("cam_blur_sigma {} must be >= 0", self.cam_blur_sigma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Disk,
    Rectangle,
    Triangle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub kind: ShapeKind,
    pub class_id: u8,
    pub center: (f64, f64),
    /// Radius of the disk or circumscribed circle; half-extent for rectangles.
    pub size: (f64, f64),
    vertices: Vec<(f64, f64)>,
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (cx, cy) = self.center;
        match self.kind {
            ShapeKind::Disk => (x - cx).powi(2) + (y - cy).powi(2) <= self.size.0 * self.size.0,
            ShapeKind::Rectangle => (x - cx).abs() <= self.size.0 && (y - cy).abs() <= self.size.1,
            ShapeKind::Triangle => {
                let v = &self.vertices;
                let side = |a: (f64, f64), b: (f64, f64)| {
                    (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0)
                };
                let s = [side(v[0], v[1]), side(v[1], v[2]), side(v[2], v[0])];
                s.iter().all(|&d| d >= 0.0) || s.iter().all(|&d| d <= 0.0)
            }
        }
    }

    /// Radius of a circle around `center` that contains the shape.
    fn bound(&self) -> f64 {
        match self.kind {
            ShapeKind::Rectangle => self.size.0.hypot(self.size.1),
            _ => self.size.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub id: String,
    pub image: RasterImage,
    pub gt: LabelMap,
    pub scores: ScoreMap,
    pub shapes: Vec<Shape>,
    /// Sorted ascending, matching the score planes.
    pub classes_present: Vec<u8>,
}

fn luma(rgb: [f64; 3]) -> f64 {
    0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
}

/// A color with roughly the requested luma and a random tint.
fn tinted(rng: &mut ChaCha8Rng, target: f64, chroma: f64) -> [f64; 3] {
    let tint = [
        rng.gen_range(-chroma..=chroma),
        rng.gen_range(-chroma..=chroma),
        rng.gen_range(-chroma..=chroma),
    ];
    let shift = target - luma(tint);
    tint.map(|t| (t + shift).clamp(0.0, 255.0))
}

fn random_shape(rng: &mut ChaCha8Rng, size: f64, class_id: u8) -> Shape {
    let kind = match rng.gen_range(0..3) {
        0 => ShapeKind::Disk,
        1 => ShapeKind::Rectangle,
        _ => ShapeKind::Triangle,
    };
    let r = rng.gen_range(0.09..0.2) * size;
    let half = (r, rng.gen_range(0.6..1.0) * r);
    let (size_xy, vertices) = match kind {
        ShapeKind::Disk => ((r, r), vec![]),
        ShapeKind::Rectangle => {
            if rng.gen_bool(0.5) {
                (half, vec![])
            } else {
                ((half.1, half.0), vec![])
            }
        }
        ShapeKind::Triangle => {
            let r = r * 1.25;
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let verts = (0..3)
                .map(|k| {
                    let a = phase
                        + k as f64 * std::f64::consts::TAU / 3.0
                        + rng.gen_range(-0.2..0.2);
                    (r * a.cos(), r * a.sin())
                })
                .collect();
            ((r, r), verts)
        }
    };
    let margin = match kind {
        ShapeKind::Rectangle => size_xy.0.hypot(size_xy.1),
        _ => size_xy.0,
    } + 4.0;
    let center = (
        rng.gen_range(margin..size - margin),
        rng.gen_range(margin..size - margin),
    );
    let vertices = vertices
        .into_iter()
        .map(|(x, y): (f64, f64)| (x + center.0, y + center.1))
        .collect();
    Shape {
        kind,
        class_id,
        center,
        size: size_xy,
        vertices,
    }
}

fn place_shapes(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Vec<Shape> {
    let size = spec.image_size as f64;
    let wanted = rng.gen_range(spec.min_shapes..=spec.max_shapes);
    let mut ids: Vec<u8> = (1..=MAX_CLASS_ID).collect();
    let mut shapes: Vec<Shape> = Vec::new();
    for _ in 0..200 {
        if shapes.len() == wanted {
            break;
        }
        let pick = rng.gen_range(0..ids.len());
        let s = random_shape(rng, size, ids[pick]);
        let clear = shapes.iter().all(|o| {
            let d = (s.center.0 - o.center.0).hypot(s.center.1 - o.center.1);
            d > s.bound() + o.bound() + 8.0
        });
        if clear {
            ids.remove(pick);
            shapes.push(s);
        }
    }
    shapes
}

/// Generates image `index` of the corpus described by `spec`.
pub fn generate_one(spec: &SynthSpec, index: usize) -> Result<SynthSample> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    rng.set_stream(index as u64);
    let n = spec.image_size;
    let size = n as f64;

    let dark_background = rng.gen_bool(0.5);
    let bg_luma = if dark_background {
        rng.gen_range(45.0..85.0)
    } else {
        rng.gen_range(170.0..210.0)
    };
    let bg = tinted(&mut rng, bg_luma, 20.0);
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            let period = rng.gen_range(10.0..28.0);
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let k = std::f64::consts::TAU / period;
            (k * angle.cos(), k * angle.sin(), rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();

    let shapes = place_shapes(&mut rng, spec);
    let colors: Vec<[f64; 3]> = shapes
        .iter()
        .map(|_| {
            let target = if dark_background {
                rng.gen_range((bg_luma + 90.0).min(225.0)..235.0)
            } else {
                rng.gen_range(20.0..(bg_luma - 90.0).max(30.0))
            };
            tinted(&mut rng, target, 35.0)
        })
        .collect();

    let amp = spec.texture_amplitude;
    let mut labels = vec![0u8; n * n];
    let mut data = Vec::with_capacity(n * n * 3);
    for y in 0..n {
        for x in 0..n {
            let (fx, fy) = (x as f64, y as f64);
            let owner = shapes.iter().position(|s| s.contains(fx, fy));
            let rgb = match owner {
                Some(i) => {
                    labels[y * n + x] = shapes[i].class_id;
                    colors[i]
                }
                None => {
                    let wave: f64 = waves
                        .iter()
                        .map(|&(kx, ky, ph)| (kx * fx + ky * fy + ph).sin())
                        .sum::<f64>()
                        / 3.0;
                    let noise = rng.gen_range(-0.25..=0.25);
                    let d = amp * (wave + noise);
                    bg.map(|c| c + d)
                }
            };
            data.extend(rgb.map(|c| c.round().clamp(0.0, 255.0) as u8));
        }
    }

    let mut shape_order: Vec<usize> = (0..shapes.len()).collect();
    shape_order.sort_by_key(|&i| shapes[i].class_id);
    let classes_present: Vec<u8> = shape_order.iter().map(|&i| shapes[i].class_id).collect();
    let mut planes: Vec<Vec<f64>> = shape_order
        .iter()
        .map(|&i| {
            let id = shapes[i].class_id;
            let ind = Plane::from_fn(n, n, |x, y| f64::from(u8::from(labels[y * n + x] == id)));
            let blurred = if spec.cam_blur_sigma > 0.0 {
                gaussian_blur(&ind, spec.cam_blur_sigma)?
            } else {
                ind
            };
            let max = blurred.max();
            Ok(blurred.data.iter().map(|v| if max > 0.0 { v / max } else { 0.0 }).collect())
        })
        .collect::<Result<_>>()?;

    if !planes.is_empty() {
        for _ in 0..spec.distractor_blob_count {
            let plane = rng.gen_range(0..planes.len());
            let peak = rng.gen_range(0.6..=0.9);
            let sigma = rng.gen_range(0.03..0.06) * size;
            let mut center = None;
            for _ in 0..100 {
                let c = (rng.gen_range(0.0..size), rng.gen_range(0.0..size));
                let clear = shapes.iter().all(|s| {
                    (c.0 - s.center.0).hypot(c.1 - s.center.1) > s.bound() + 2.5 * sigma
                });
                if clear {
                    center = Some(c);
                    break;
                }
            }
            let Some((cx, cy)) = center else { continue };
            for (p, v) in planes[plane].iter_mut().enumerate() {
                let (x, y) = ((p % n) as f64, (p / n) as f64);
                let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                *v = (*v + peak * (-d2 / (2.0 * sigma * sigma)).exp()).min(1.0);
            }
        }
    }

    let planes = planes
        .into_iter()
        .map(|p| p.into_iter().map(|v| v as f32).collect())
        .collect();
    Ok(SynthSample {
        id: format!("synth_{index:04}"),
        image: RasterImage::new(n, n, data)?,
        gt: LabelMap::new(n, n, labels)?,
        scores: ScoreMap::new(n, n, classes_present.clone(), planes)?,
        shapes,
        classes_present,
    })
}

pub fn generate(spec: &SynthSpec) -> Result<Vec<SynthSample>> {
    (0..spec.image_count).map(|i| generate_one(spec, i)).collect()
}

pub fn class_names() -> Vec<String> {
    std::iter::once("background".to_owned())
        .chain((1..=MAX_CLASS_ID).map(|c| format!("class{c}")))
        .collect()
}

/// Writes images, ground truth, score maps, `manifest.json`, `classes.json`,
/// and `palette.json` under `out`. Returns the manifest path.
pub fn write_dataset(samples: &[SynthSample], out: &Path) -> Result<PathBuf> {
    for sub in ["images", "gt", "scores"] {
        fsio::create_dir(&out.join(sub))?;
    }
    let mut entries = Vec::with_capacity(samples.len());
    for s in samples {
        let image_path = PathBuf::from(format!("images/{}.ppm", s.id));
        let gt_path = PathBuf::from(format!("gt/{}.pgm", s.id));
        let score_path = PathBuf::from(format!("scores/{}.smf", s.id));
        netpbm::save_ppm(&s.image, &out.join(&image_path))?;
        netpbm::save_label_map(&s.gt, &out.join(&gt_path))?;
        smf::save_smf(&s.scores, &out.join(&score_path))?;
        entries.push(ManifestEntry {
            id: s.id.clone(),
            image_path,
            score_path,
            gt_path: Some(gt_path),
            classes_present: s.classes_present.clone(),
        });
    }
    fsio::write_json(&out.join("classes.json"), &class_names())?;
    palette::save_palette(
        &palette::voc_palette(usize::from(MAX_CLASS_ID) + 1),
        &out.join("palette.json"),
    )?;
    let manifest_path = out.join("manifest.json");
    Manifest {
        base_dir: out.to_owned(),
        entries,
    }
    .save(&manifest_path)?;
    Ok(manifest_path)
}
