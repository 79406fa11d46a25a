//! Segmentation metrics over a pooled confusion matrix.
//!
//! * [`miou`]: per-class intersection over union and its mean.
//! * [`overactivation`]: `m_FP` and `m_FN`, the foreground-class means of
//!   `FP_c / TP_c` and `FN_c / TP_c`.
//! * [`decompose_prediction`]: splits a binary prediction into the covered
//!   fraction of the positive set and the count of false positives.
//!
//! Classes whose ratio has a zero denominator are *undefined*: they are left
//! out of the means and surfaced in the report.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_same_dims, Error, Result};
use crate::image::{LabelMap, IGNORE_LABEL};
use crate::perimeterfit::BinaryMask;

/// `counts[gt][pred]` pixel counts over `C` classes, background included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    /// Builds a matrix from row-major counts.
    pub fn from_counts(num_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != num_classes * num_classes {
            return Err(Error::InvalidDimensions(format!(
                "{} counts for {num_classes} classes",
                counts.len()
            )));
        }
        Ok(Self {
            num_classes,
            counts,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one prediction. Pixels whose ground truth is `255` are skipped;
    /// every other label must be a valid class id. Nothing is counted when
    /// the inputs are rejected.
    pub fn accumulate(&mut self, gt: &LabelMap, pred: &LabelMap) -> Result<()> {
        check_same_dims(gt.dims(), pred.dims())?;
        gt.validate(self.num_classes)?;
        let c = self.num_classes;
        for (index, (&g, &p)) in gt.labels().iter().zip(pred.labels()).enumerate() {
            if g != IGNORE_LABEL && usize::from(p) >= c {
                return Err(Error::LabelOutOfRange {
                    index,
                    label: p,
                    num_classes: c,
                });
            }
        }
        for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
            if g != IGNORE_LABEL {
                self.counts[usize::from(g) * c + usize::from(p)] += 1;
            }
        }
        Ok(())
    }

    /// Elementwise sum with a matrix over the same classes.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::InvalidDimensions(format!(
                "merging {} classes into {}",
                other.num_classes, self.num_classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn true_positives(&self, c: usize) -> u64 {
        self.get(c, c)
    }

    /// Pixels predicted as `c` whose ground truth is another class.
    pub fn false_positives(&self, c: usize) -> u64 {
        (0..self.num_classes).filter(|&i| i != c).map(|i| self.get(i, c)).sum()
    }

    /// Pixels of class `c` predicted as another class.
    pub fn false_negatives(&self, c: usize) -> u64 {
        (0..self.num_classes).filter(|&j| j != c).map(|j| self.get(c, j)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouSummary {
    /// `None` where the class is absent from both ground truth and prediction.
    pub per_class: Vec<Option<f64>>,
    pub miou: f64,
}

/// `IoU_i = p_ii / (sum_j p_ij + sum_j p_ji - p_ii)`, averaged over the
/// classes where it is defined.
pub fn miou(cm: &ConfusionMatrix) -> Result<IouSummary> {
    let c = cm.num_classes;
    if c == 0 {
        return Err(Error::UndefinedMetric("empty confusion matrix".into()));
    }
    let per_class: Vec<Option<f64>> = (0..c)
        .map(|i| {
            let tp = cm.get(i, i);
            let row: u64 = (0..c).map(|j| cm.get(i, j)).sum();
            let col: u64 = (0..c).map(|j| cm.get(j, i)).sum();
            let union = row + col - tp;
            (union > 0).then(|| tp as f64 / union as f64)
        })
        .collect();
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedMetric("no class has a defined IoU".into()));
    }
    let miou = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(IouSummary { per_class, miou })
}

/// Treatment of foreground classes with no true positives in
/// [`overactivation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroTpPolicy {
    /// Leave the class out of the mean.
    Exclude,
    /// Count the class with this ratio.
    Sentinel(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overactivation {
    pub m_fp: f64,
    pub m_fn: f64,
    /// Foreground classes with `TP = 0`.
    pub zero_tp_classes: usize,
}

/// Mean `FP_c / TP_c` and `FN_c / TP_c` over the foreground classes
/// `1..C`, background excluded.
pub fn overactivation(cm: &ConfusionMatrix, policy: ZeroTpPolicy) -> Result<Overactivation> {
    let c = cm.num_classes;
    if c < 2 {
        return Err(Error::UndefinedMetric(
            "over-activation needs a foreground class".into(),
        ));
    }
    let (mut fp_sum, mut fn_sum, mut terms, mut zero) = (0.0, 0.0, 0usize, 0usize);
    for class in 1..c {
        let tp = cm.true_positives(class);
        if tp == 0 {
            zero += 1;
            if let ZeroTpPolicy::Sentinel(v) = policy {
                fp_sum += v;
                fn_sum += v;
                terms += 1;
            }
            continue;
        }
        fp_sum += cm.false_positives(class) as f64 / tp as f64;
        fn_sum += cm.false_negatives(class) as f64 / tp as f64;
        terms += 1;
    }
    if terms == 0 {
        return Err(Error::UndefinedMetric(
            "every foreground class has zero true positives".into(),
        ));
    }
    Ok(Overactivation {
        m_fp: fp_sum / terms as f64,
        m_fn: fn_sum / terms as f64,
        zero_tp_classes: zero,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `|pred ∩ gt| / |gt|`; `None` when the ground truth is empty.
    pub epsilon: Option<f64>,
    /// `|pred \ gt|`
    pub fp_count: u64,
}

/// Splits a prediction into the covered share of the positive set and the
/// number of false positives.
pub fn decompose_prediction(gt: &BinaryMask, pred: &BinaryMask) -> Result<Decomposition> {
    check_same_dims(gt.dims(), pred.dims())?;
    Ok(decompose_bits(gt.bits().iter().copied().zip(pred.bits().iter().copied())))
}

fn decompose_bits(pairs: impl Iterator<Item = (bool, bool)>) -> Decomposition {
    let (mut positives, mut hits, mut fp) = (0u64, 0u64, 0u64);
    for (g, p) in pairs {
        positives += u64::from(g);
        hits += u64::from(g && p);
        fp += u64::from(p && !g);
    }
    Decomposition {
        epsilon: (positives > 0).then(|| hits as f64 / positives as f64),
        fp_count: fp,
    }
}

/// [`decompose_prediction`] on the union of all foreground classes of a
/// label pair; ignored ground-truth pixels are skipped.
pub fn decompose_labels(gt: &LabelMap, pred: &LabelMap) -> Result<Decomposition> {
    check_same_dims(gt.dims(), pred.dims())?;
    Ok(decompose_bits(
        gt.labels()
            .iter()
            .zip(pred.labels())
            .filter(|(&g, _)| g != IGNORE_LABEL)
            .map(|(&g, &p)| (g != 0, p != 0)),
    ))
}

/// Running per-image means of [`Decomposition`] values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub images: usize,
    pub epsilon_sum: f64,
    pub epsilon_defined: usize,
    pub fp_sum: u64,
}

impl DecompositionSummary {
    pub fn add(&mut self, d: &Decomposition) {
        self.images += 1;
        self.fp_sum += d.fp_count;
        if let Some(e) = d.epsilon {
            self.epsilon_sum += e;
            self.epsilon_defined += 1;
        }
    }

    pub fn epsilon_mean(&self) -> Option<f64> {
        (self.epsilon_defined > 0).then(|| self.epsilon_sum / self.epsilon_defined as f64)
    }

    pub fn fp_count_mean(&self) -> Option<f64> {
        (self.images > 0).then(|| self.fp_sum as f64 / self.images as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    pub per_class_iou: Vec<Option<f64>>,
    pub miou: f64,
    pub m_fp: Option<f64>,
    pub m_fn: Option<f64>,
    pub zero_tp_classes: usize,
    pub epsilon_mean: Option<f64>,
    pub fp_count_mean: Option<f64>,
}

/// Builds the machine-readable report and an aligned text table with one
/// row per class followed by the mean and the over-activation measures.
pub fn report(
    cm: &ConfusionMatrix,
    class_names: &[String],
    decomposition: Option<&DecompositionSummary>,
) -> Result<(MetricsReport, String)> {
    if class_names.len() != cm.num_classes {
        return Err(Error::InvalidParameter(format!(
            "{} class names for {} classes",
            class_names.len(),
            cm.num_classes
        )));
    }
    let iou = miou(cm)?;
    let over = overactivation(cm, ZeroTpPolicy::Exclude).ok();
    let report = MetricsReport {
        class_names: class_names.to_vec(),
        per_class_iou: iou.per_class.clone(),
        miou: iou.miou,
        m_fp: over.as_ref().map(|o| o.m_fp),
        m_fn: over.as_ref().map(|o| o.m_fn),
        zero_tp_classes: over
            .as_ref()
            .map_or(cm.num_classes.saturating_sub(1), |o| o.zero_tp_classes),
        epsilon_mean: decomposition.and_then(|d| d.epsilon_mean()),
        fp_count_mean: decomposition.and_then(|d| d.fp_count_mean()),
    };
    let table = format_table(&report);
    Ok((report, table))
}

fn format_table(r: &MetricsReport) -> String {
    let width = r
        .class_names
        .iter()
        .map(|n| n.chars().count())
        .chain([5])
        .max()
        .unwrap_or(5);
    let pct = |v: Option<f64>| v.map_or_else(|| String::from("-"), |v| format!("{:.2}", 100.0 * v));
    let ratio = |v: Option<f64>| v.map_or_else(|| String::from("-"), |v| format!("{v:.4}"));
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>8}", "class", "IoU (%)");
    for (name, v) in r.class_names.iter().zip(&r.per_class_iou) {
        let _ = writeln!(out, "{name:<width$}  {:>8}", pct(*v));
    }
    let _ = writeln!(out, "{:<width$}  {:>8}", "mIoU", pct(Some(r.miou)));
    let _ = writeln!(out, "{:<width$}  {:>8}", "m_FP", ratio(r.m_fp));
    let _ = writeln!(out, "{:<width$}  {:>8}", "m_FN", ratio(r.m_fn));
    out
}
