//! Batch orchestration over manifests.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use perimeterfit_core::edges::{CannyParams, PerimeterMap};
use perimeterfit_core::grid::{grid_search, GridSample, GridSearchResult, Objective};
use perimeterfit_core::metrics::{
    decompose_labels, report, ConfusionMatrix, DecompositionSummary, MetricsReport,
};
use perimeterfit_core::perimeterfit::{build_perimeter_map, refine_multiclass, Fusion, RefineParams};
use perimeterfit_core::superpixels::{Method, SimplifyParams};
use perimeterfit_core::{LabelMap, RasterImage, ScoreMap};

use crate::error::{Error, Result};
use crate::manifest::{Manifest, ManifestEntry};
use crate::netpbm;

/// Perimeter maps of the SLIC and Quickshift variants of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct PerimeterPair {
    pub slic: PerimeterMap,
    pub quick: PerimeterMap,
}

pub fn perimeter_pair(
    image: &RasterImage,
    simplify: &SimplifyParams,
    canny: &CannyParams,
) -> Result<PerimeterPair> {
    let variant = |method| {
        let params = SimplifyParams {
            method,
            ..simplify.clone()
        };
        build_perimeter_map(image, &params, canny)
    };
    Ok(PerimeterPair {
        slic: variant(Method::Slic)?,
        quick: variant(Method::Quickshift)?,
    })
}

/// Perimeter maps keyed by image id and the parameters that produced them.
#[derive(Debug, Default)]
pub struct PerimeterCache {
    maps: Mutex<HashMap<(String, String), Arc<PerimeterPair>>>,
}

impl PerimeterCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(id: &str, simplify: &SimplifyParams, canny: &CannyParams) -> (String, String) {
        let params = serde_json::to_string(&(simplify, canny)).expect("serializable params");
        (id.to_owned(), params)
    }

    pub fn get_or_compute(
        &self,
        id: &str,
        image: &RasterImage,
        simplify: &SimplifyParams,
        canny: &CannyParams,
    ) -> Result<Arc<PerimeterPair>> {
        let key = Self::key(id, simplify, canny);
        if let Some(hit) = self.maps.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let pair = Arc::new(perimeter_pair(image, simplify, canny)?);
        self.maps
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert_with(|| Arc::clone(&pair));
        Ok(pair)
    }

    pub fn len(&self) -> usize {
        self.maps.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {workers} workers: {e}")))
}

/// Applies `f` to every item on `workers` threads; results keep input order
/// and the first error in that order wins.
pub fn par_map<T, U, F>(workers: usize, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    let pool = thread_pool(workers)?;
    pool.install(|| items.par_iter().map(&f).collect::<Vec<_>>())
        .into_iter()
        .collect()
}

/// Everything needed to refine one manifest entry.
pub struct LoadedEntry {
    pub id: String,
    pub scores: ScoreMap,
    pub perimeters: Arc<PerimeterPair>,
    pub gt: Option<LabelMap>,
}

pub fn load_entry(
    manifest: &Manifest,
    entry: &ManifestEntry,
    cache: &PerimeterCache,
    simplify: &SimplifyParams,
    canny: &CannyParams,
    with_gt: bool,
) -> Result<LoadedEntry> {
    let image = manifest.load_image(entry)?;
    let scores = manifest.load_scores(entry)?;
    if image.dims() != scores.dims() {
        return Err(Error::Core(perimeterfit_core::Error::DimensionMismatch {
            left_w: image.width(),
            left_h: image.height(),
            right_w: scores.width(),
            right_h: scores.height(),
        })
        .in_entry(&entry.id));
    }
    let gt = if with_gt {
        Some(manifest.load_gt(entry)?)
    } else {
        None
    };
    let perimeters = cache
        .get_or_compute(&entry.id, &image, simplify, canny)
        .map_err(|e| e.in_entry(&entry.id))?;
    Ok(LoadedEntry {
        id: entry.id.clone(),
        scores,
        perimeters,
        gt,
    })
}

pub fn refine_entry(loaded: &LoadedEntry, params: &RefineParams) -> Result<LabelMap> {
    refine_multiclass(
        &loaded.scores,
        &loaded.perimeters.slic,
        &loaded.perimeters.quick,
        params,
    )
    .map_err(|e| Error::from(e).in_entry(&loaded.id))
}

/// Refines every entry and writes `<outdir>/<id>.pgm`, in manifest order.
pub fn refine_manifest(
    manifest: &Manifest,
    outdir: &Path,
    simplify: &SimplifyParams,
    canny: &CannyParams,
    params: &RefineParams,
    workers: usize,
) -> Result<Vec<LabelMap>> {
    params.validate()?;
    let cache = PerimeterCache::new();
    let labels = par_map(workers, &manifest.entries, |e| {
        let loaded = load_entry(manifest, e, &cache, simplify, canny, false)?;
        refine_entry(&loaded, params)
    })?;
    for (e, l) in manifest.entries.iter().zip(&labels) {
        netpbm::save_label_map(l, &outdir.join(format!("{}.pgm", e.id)))?;
    }
    Ok(labels)
}

/// Searches the refinement grid against the manifest's ground truth,
/// computing each image's perimeter maps once.
#[allow(clippy::too_many_arguments)]
pub fn grid_search_manifest(
    manifest: &Manifest,
    cache: &PerimeterCache,
    simplify: &SimplifyParams,
    canny: &CannyParams,
    num_classes: usize,
    t_slic: &[f64],
    t_quick: &[f64],
    fusions: &[Fusion],
    objective: Objective,
    workers: usize,
) -> Result<GridSearchResult> {
    manifest.require_gt()?;
    let loaded = par_map(workers, &manifest.entries, |e| {
        load_entry(manifest, e, cache, simplify, canny, true)
    })?;
    let samples: Vec<GridSample<'_>> = loaded
        .iter()
        .map(|l| GridSample {
            scores: &l.scores,
            pm_slic: &l.perimeters.slic,
            pm_quick: &l.perimeters.quick,
            gt: l.gt.as_ref().expect("loaded with ground truth"),
        })
        .collect();
    Ok(grid_search(
        &samples,
        num_classes,
        t_slic,
        t_quick,
        fusions,
        objective,
    )?)
}

/// Scores `<pred_dir>/<id>.pgm` against each entry's ground truth.
pub fn evaluate_manifest(
    manifest: &Manifest,
    pred_dir: &Path,
    class_names: &[String],
    workers: usize,
) -> Result<(MetricsReport, String)> {
    manifest.require_gt()?;
    let c = class_names.len();
    let per_image = par_map(workers, &manifest.entries, |e| {
        let gt = manifest.load_gt(e)?;
        let pred = netpbm::load_label_map(&pred_dir.join(format!("{}.pgm", e.id)))
            .map_err(|err| err.in_entry(&e.id))?;
        let mut cm = ConfusionMatrix::new(c);
        cm.accumulate(&gt, &pred)
            .map_err(|err| Error::from(err).in_entry(&e.id))?;
        let d = decompose_labels(&gt, &pred).map_err(|err| Error::from(err).in_entry(&e.id))?;
        Ok((cm, d))
    })?;
    let mut cm = ConfusionMatrix::new(c);
    let mut decomposition = DecompositionSummary::default();
    for (m, d) in &per_image {
        cm.merge(m)?;
        decomposition.add(d);
    }
    Ok(report(&cm, class_names, Some(&decomposition))?)
}
