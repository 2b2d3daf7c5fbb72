//! JSON run configuration. Every field is optional; flags override it.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use trial_return::SimConfig;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketFile {
    pub v1: Option<f64>,
    pub v2: Option<f64>,
    pub p2_bar: Option<f64>,
    pub alpha: Option<f64>,
    pub r: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub market: MarketFile,
    pub sim: Option<SimConfig>,
    pub p1: Option<f64>,
    pub coverage: Option<bool>,
    pub plane: Option<String>,
    pub steps: Option<usize>,
    pub steps_y: Option<usize>,
    pub ratio_lo: Option<f64>,
    pub ratio_hi: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub samples: Option<usize>,
    pub sigma: Option<f64>,
    pub ci_halfwidth_limit: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }
}
