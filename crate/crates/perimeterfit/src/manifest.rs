//! Dataset manifests: a JSON array of per-image entries.
//!
//! Relative paths resolve against the directory holding the manifest.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use perimeterfit_core::{LabelMap, RasterImage, ScoreMap};

use crate::error::{Error, Result};
use crate::{fsio, netpbm, smf};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub image_path: PathBuf,
    pub score_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_path: Option<PathBuf>,
    pub classes_present: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    /// Directory that relative entry paths are resolved against.
    pub base_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Parses and validates a manifest; referenced files must exist.
    pub fn load(path: &Path) -> Result<Manifest> {
        let entries: Vec<ManifestEntry> = fsio::read_json(path)?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let manifest = Manifest { base_dir, entries };
        manifest.validate()?;
        for e in &manifest.entries {
            let paths = [Some(&e.image_path), Some(&e.score_path), e.gt_path.as_ref()];
            for p in paths.into_iter().flatten() {
                let full = manifest.resolve(p);
                if !full.is_file() {
                    return Err(Error::Manifest(format!(
                        "entry {}: missing file {}",
                        e.id,
                        full.display()
                    )));
                }
            }
        }
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for e in &self.entries {
            if e.id.is_empty() || e.id.contains(['/', '\\']) || e.id.starts_with('.') {
                return Err(Error::Manifest(format!("invalid entry id {:?}", e.id)));
            }
            if !ids.insert(e.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate entry id {:?}", e.id)));
            }
            if e.classes_present.is_empty() {
                return Err(Error::Manifest(format!(
                    "entry {}: classes_present is empty",
                    e.id
                )));
            }
            for (i, &c) in e.classes_present.iter().enumerate() {
                if c == 0 || c == perimeterfit_core::IGNORE_LABEL || e.classes_present[..i].contains(&c) {
                    return Err(Error::Manifest(format!(
                        "entry {}: bad or repeated class id {c} in classes_present",
                        e.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        fsio::write_json(path, &self.entries)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn require_gt(&self) -> Result<()> {
        match self.entries.iter().find(|e| e.gt_path.is_none()) {
            Some(e) => Err(Error::Manifest(format!("entry {}: no gt_path", e.id))),
            None => Ok(()),
        }
    }

    pub fn load_image(&self, e: &ManifestEntry) -> Result<RasterImage> {
        netpbm::load_ppm(&self.resolve(&e.image_path)).map_err(|err| err.in_entry(&e.id))
    }

    /// The score planes of `classes_present`, in that order.
    pub fn load_scores(&self, e: &ManifestEntry) -> Result<ScoreMap> {
        let all = smf::load_smf(&self.resolve(&e.score_path)).map_err(|err| err.in_entry(&e.id))?;
        all.select(&e.classes_present).ok_or_else(|| {
            Error::Manifest(format!(
                "entry {}: score map lacks some of classes {:?}",
                e.id, e.classes_present
            ))
        })
    }

    pub fn load_gt(&self, e: &ManifestEntry) -> Result<LabelMap> {
        let path = e
            .gt_path
            .as_ref()
            .ok_or_else(|| Error::Manifest(format!("entry {}: no gt_path", e.id)))?;
        netpbm::load_label_map(&self.resolve(path)).map_err(|err| err.in_entry(&e.id))
    }
}

/// Class names indexed by class id, read from a JSON array of strings.
pub fn load_class_names(path: &Path) -> Result<Vec<String>> {
    let names: Vec<String> = fsio::read_json(path)?;
    if names.len() < 2 || names.len() > 255 {
        return Err(Error::Usage(format!(
            "{}: need between 2 and 255 class names, found {}",
            path.display(),
            names.len()
        )));
    }
    Ok(names)
}
