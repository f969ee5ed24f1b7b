use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use sde_core::enhance::SubspaceMask;
use sde_core::gradcheck::{DEFAULT_STEP, SUITE_INSTANCES};
use sde_core::harness::{AblationMode, TaskConfig, TrainConfig};
use sde_core::spectral::NoiseEstimator;
use sde_core::{Result, SdeError};

const DEFAULT_BATCH: usize = 256;

/// Everything a run can be configured with. Each command reads the sections
/// it needs; the merged value is what the manifest records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub analyze: AnalyzeConfig,
    pub enhance: EnhanceConfig,
    pub schedules: SchedulesConfig,
    pub gradcheck: GradcheckConfig,
    pub task: TaskConfig,
    pub train: TrainConfig,
    pub ablate: AblateConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub estimator: NoiseEstimator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhanceConfig {
    /// Fixed `α`; when absent it comes from the schedule at `step`.
    pub alpha: Option<f64>,
    pub step: Option<usize>,
    pub total_steps: Option<usize>,
    pub batch_size: usize,
    pub estimator: NoiseEstimator,
    pub mask: SubspaceMask,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            step: None,
            total_steps: None,
            batch_size: DEFAULT_BATCH,
            estimator: NoiseEstimator::default(),
            mask: SubspaceMask::ALL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulesConfig {
    pub total_steps: usize,
    pub batch_size: usize,
}

impl Default for SchedulesConfig {
    fn default() -> Self {
        Self { total_steps: 1000, batch_size: DEFAULT_BATCH }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub instances: usize,
    pub step_size: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self { instances: SUITE_INSTANCES, step_size: DEFAULT_STEP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub modes: Vec<AblationMode>,
    pub seeds: Vec<u64>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self { modes: AblationMode::ALL.to_vec(), seeds: (0..5).collect() }
    }
}

/// Parses a config document. Errors name the dotted path of the offending key.
pub fn parse(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.into_inner().to_string();
        let key = if path == "." { "<root>".to_string() } else { path };
        SdeError::Config { key, message }
    })
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| SdeError::Io { offset: 0, source })?;
    parse(&text)
}
