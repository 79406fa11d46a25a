//! Exhaustive search over the two refinement thresholds and fusion modes.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::edges::PerimeterMap;
use crate::error::{check_same_dims, Error, Result};
use crate::image::{LabelMap, ScoreMap};
use crate::metrics::{miou, overactivation, ConfusionMatrix, ZeroTpPolicy};
use crate::perimeterfit::{
    label_from_masks, refine_class, threshold_cam, BinaryMask, Fusion, RefineParams, ScorePlane,
};

/// Quantity maximized by [`grid_search`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Mean IoU over the pooled confusion matrix.
    Miou,
    /// Negated `m_FP`, favoring the least over-activated masks.
    NegMFp,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Miou => "miou",
            Objective::NegMFp => "neg_m_fp",
        }
    }

    pub fn parse(s: &str) -> Option<Objective> {
        [Objective::Miou, Objective::NegMFp]
            .into_iter()
            .find(|o| o.name() == s)
    }

    /// Value on a pooled matrix; `None` where the metric is undefined.
    pub fn evaluate(self, cm: &ConfusionMatrix) -> Option<f64> {
        match self {
            Objective::Miou => miou(cm).ok().map(|s| s.miou),
            Objective::NegMFp => overactivation(cm, ZeroTpPolicy::Exclude)
                .ok()
                .map(|o| -o.m_fp),
        }
    }
}

/// One image of the search split with its cached perimeter maps.
#[derive(Debug, Clone, Copy)]
pub struct GridSample<'a> {
    pub scores: &'a ScoreMap,
    pub pm_slic: &'a PerimeterMap,
    pub pm_quick: &'a PerimeterMap,
    pub gt: &'a LabelMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub t_slic: f64,
    pub t_quick: f64,
    pub fusion: Fusion,
    /// `None` when the objective is undefined at this point.
    pub objective_value: Option<f64>,
}

impl GridEntry {
    pub fn params(&self) -> RefineParams {
        RefineParams {
            threshold_slic: self.t_slic,
            threshold_quick: self.t_quick,
            fusion: self.fusion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub objective: Objective,
    /// Entries in lexicographic `(t_slic, t_quick, fusion)` order.
    pub grid: Vec<GridEntry>,
    /// First entry attaining the maximum objective.
    pub best: GridEntry,
}

/// Inclusive arithmetic range `start, start + step, ..., <= end`, with
/// values rounded to 12 decimals.
pub fn threshold_range(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite() && start.is_finite() && end.is_finite()) || end < start {
        return Err(Error::InvalidParameter(format!(
            "bad range {start}:{end}:{step}"
        )));
    }
    let count = libm::floor((end - start) / step + 1e-9) as usize + 1;
    Ok((0..count)
        .map(|i| libm::round((start + i as f64 * step) * 1e12) / 1e12)
        .collect())
}

fn sorted_unique<T: PartialOrd + Copy>(values: &[T]) -> Vec<T> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    v.dedup_by(|a, b| a == b);
    v
}

/// Refined per-class masks of every sample at every threshold of one variant.
fn refined_masks(
    samples: &[GridSample<'_>],
    thresholds: &[f64],
    pm: impl for<'s> Fn(&'s GridSample<'_>) -> &'s PerimeterMap,
) -> Result<Vec<Vec<Vec<BinaryMask>>>> {
    samples
        .iter()
        .map(|s| {
            thresholds
                .iter()
                .map(|&t| {
                    (0..s.scores.num_classes())
                        .map(|i| {
                            let plane = ScorePlane::of(s.scores, i);
                            refine_class(&threshold_cam(plane, t)?, pm(s), plane, t)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Evaluates refinement over the Cartesian grid of thresholds and fusions,
/// pooling one confusion matrix per grid point across all samples.
pub fn grid_search(
    samples: &[GridSample<'_>],
    num_classes: usize,
    t_slic: &[f64],
    t_quick: &[f64],
    fusions: &[Fusion],
    objective: Objective,
) -> Result<GridSearchResult> {
    let t_slic = sorted_unique(t_slic);
    let t_quick = sorted_unique(t_quick);
    let fusions = sorted_unique(fusions);
    if t_slic.is_empty() || t_quick.is_empty() || fusions.is_empty() || samples.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for &t in t_slic.iter().chain(&t_quick) {
        RefineParams {
            threshold_slic: t,
            threshold_quick: t,
            fusion: Fusion::Union,
        }
        .validate()?;
    }
    for s in samples {
        check_same_dims(s.scores.dims(), s.gt.dims())?;
        check_same_dims(s.scores.dims(), s.pm_slic.dims())?;
        check_same_dims(s.scores.dims(), s.pm_quick.dims())?;
        s.gt.validate(num_classes)?;
    }

    let slic_masks = refined_masks(samples, &t_slic, |s| s.pm_slic)?;
    let quick_masks = refined_masks(samples, &t_quick, |s| s.pm_quick)?;

    let mut grid = Vec::with_capacity(t_slic.len() * t_quick.len() * fusions.len());
    for (si, &ts) in t_slic.iter().enumerate() {
        for (qi, &tq) in t_quick.iter().enumerate() {
            for &fusion in &fusions {
                let mut cm = ConfusionMatrix::new(num_classes);
                for (k, sample) in samples.iter().enumerate() {
                    let masks = slic_masks[k][si]
                        .iter()
                        .zip(&quick_masks[k][qi])
                        .map(|(s, q)| match fusion {
                            Fusion::Union => s.union(q),
                            Fusion::Intersection => s.intersection(q),
                            Fusion::SlicOnly => Ok(s.clone()),
                            Fusion::QuickOnly => Ok(q.clone()),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let pred = label_from_masks(sample.scores, &masks)?;
                    cm.accumulate(sample.gt, &pred)?;
                }
                grid.push(GridEntry {
                    t_slic: ts,
                    t_quick: tq,
                    fusion,
                    objective_value: objective.evaluate(&cm),
                });
            }
        }
    }

    let mut best = &grid[0];
    for e in &grid[1..] {
        if e.objective_value > best.objective_value {
            best = e;
        }
    }
    let best = best.clone();
    Ok(GridSearchResult {
        objective,
        grid,
        best,
    })
}
