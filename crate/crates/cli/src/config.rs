//! Optional JSON run configuration. Every section falls back to the library
//! defaults, and command-line flags override whatever the file sets.

use std::fs;
use std::path::Path;

use gmm_reparam::model::FitConfig;
use gmm_reparam::reparam::ReparamConfig;
use gmm_reparam::scene::{SuccessThresholds, Variation};
use gmm_reparam::synth::SynthConfig;
use serde::Deserialize;

use crate::Usage;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: Option<SynthConfig>,
    pub fit: FitConfig,
    pub reparam: ReparamConfig,
    pub thresholds: SuccessThresholds,
    /// Regression rate, Hz.
    pub rate: Option<f64>,
    /// Seed for whichever command runs; overrides the per-section seeds.
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub variation: Option<Variation>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text =
            fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
        let cfg =
            serde_json::from_str(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }
}
