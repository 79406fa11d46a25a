//! Run configuration, layered as command line over config file over defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use perimeterfit_core::edges::CannyParams;
use perimeterfit_core::grid::threshold_range;
use perimeterfit_core::perimeterfit::{Fusion, RefineParams};
use perimeterfit_core::superpixels::SimplifyParams;

use crate::error::{Error, Result};
use crate::fsio;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub simplify: SimplifyParams,
    pub canny: CannyParams,
    pub refine: RefineParams,
    /// Worker threads for batch commands; changes wall time only.
    pub workers: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            simplify: SimplifyParams::default(),
            canny: CannyParams::default(),
            refine: RefineParams::default(),
            workers: 1,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with the sections present in a JSON config file.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        fsio::read_json(path)
    }

    pub fn validate(&self) -> Result<()> {
        self.simplify.validate()?;
        self.canny.validate()?;
        self.refine.validate()?;
        if self.workers == 0 {
            return Err(Error::Usage("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// Simplification parameters with the method replaced.
    pub fn simplify_for(&self, method: perimeterfit_core::superpixels::Method) -> SimplifyParams {
        SimplifyParams {
            method,
            ..self.simplify.clone()
        }
    }
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
}

impl RunHeader {
    pub fn new(subcommand: &str, config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            subcommand: subcommand.to_owned(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config: config.clone(),
            extra: None,
        }
    }

    pub fn input(mut self, key: &str, path: &Path) -> Self {
        self.inputs.insert(key.to_owned(), path.display().to_string());
        self
    }

    pub fn output(mut self, key: &str, path: &Path) -> Self {
        self.outputs.insert(key.to_owned(), path.display().to_string());
        self
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fsio::write_json(path, self)
    }
}

/// Parses `start:end:step` into an inclusive list of thresholds.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Usage(format!("bad range {s:?}, expected start:end:step")))?;
    match nums[..] {
        [v] => Ok(vec![v]),
        [a, b, step] => Ok(threshold_range(a, b, step)?),
        _ => Err(Error::Usage(format!("bad range {s:?}, expected start:end:step"))),
    }
}

pub fn parse_fusions(s: &str) -> Result<Vec<Fusion>> {
    s.split(',')
        .map(|f| {
            Fusion::parse(f.trim()).ok_or_else(|| Error::Usage(format!("unknown fusion {f:?}")))
        })
        .collect()
}
