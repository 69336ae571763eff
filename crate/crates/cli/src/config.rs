//! Experiment description file: one TOML document drives every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use govlab::encoder::StateLayout;
use govlab::power::{FrequencyTable, PowerParams};
use govlab::rl::train::TrainConfig;
use govlab::sim::{SimConfig, StopMode};
use govlab::workload::{scenario, ScenarioName, ScenarioSpec, Workload};

use crate::error::{CliError, Result};

/// Top-level document. Only `[workload]` is mandatory; every other section
/// falls back to the defaults of the underlying library.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub workload: WorkloadSection,
    /// Operating-point table; defaults to the built-in two-level map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<FrequencyTable>,
    /// Power-model coefficients; defaults to the calibrated values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerParams>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub governor: GovernorSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    pub scenario: ScenarioName,
    #[serde(default = "default_cores")]
    pub cores: usize,
    /// Request period; one pass must finish within it.
    pub period_s: f64,
    /// Recording length for the audio-style scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub io_wait_s: Option<f64>,
    /// Target runtime at the reference frequency for the benchmark scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_runtime_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_sampling_period")]
    pub sampling_period_s: f64,
    /// Fractional jitter on the sampling period (0 disables it).
    #[serde(default)]
    pub jitter_frac: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            sampling_period_s: default_sampling_period(),
            jitter_frac: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GovernorSection {
    /// performance | powersave | pinned | ondemand | conservative |
    /// schedutil | rl
    #[serde(default = "default_governor")]
    pub name: String,
    /// Trained model for `rl`: a `.json` training artifact (float policy) or
    /// a `.qgov` file (integer policy). Relative paths are resolved against
    /// the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub powersave_bias: Option<f64>,
    /// Level index for the `pinned` governor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_level: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_episodes")]
    pub episodes: u32,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Hidden layer widths of the Q-network.
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// State layout: compact | full.
    #[serde(default = "default_layout")]
    pub layout: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_episodes: Option<u32>,
    /// Rollout jitter; falls back to `[sim] jitter_frac`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter_frac: Option<f64>,
    /// Peak-utilization band boundaries of the encoded state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_uppers: Option<Vec<f64>>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            episodes: default_episodes(),
            seeds: default_seeds(),
            hidden: default_hidden(),
            layout: default_layout(),
            gamma: None,
            learning_rate: None,
            eval_episodes: None,
            jitter_frac: None,
            interval_uppers: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
        }
    }
}

fn default_cores() -> usize {
    4
}
fn default_sampling_period() -> f64 {
    0.02
}
fn default_governor() -> String {
    "ondemand".into()
}
fn default_episodes() -> u32 {
    300
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_hidden() -> Vec<usize> {
    vec![8, 8]
}
fn default_layout() -> String {
    "compact".into()
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Read, parse, validate, and resolve file references relative to the
    /// config's own directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        if let Some(model) = cfg.governor.model.take() {
            let resolved = if model.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(&model)
            } else {
                model
            };
            if !resolved.exists() {
                return Err(CliError::Config(format!(
                    "model file {} referenced by the config does not exist",
                    resolved.display()
                )));
            }
            cfg.governor.model = Some(resolved);
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.workload.period_s.is_finite() && self.workload.period_s > 0.0) {
            return Err(CliError::Config(format!(
                "[workload] period_s must be a positive deadline, got {}",
                self.workload.period_s
            )));
        }
        if !(self.sim.sampling_period_s.is_finite() && self.sim.sampling_period_s > 0.0) {
            return Err(CliError::Config(format!(
                "[sim] sampling_period_s must be positive, got {}",
                self.sim.sampling_period_s
            )));
        }
        if !(0.0..1.0).contains(&self.sim.jitter_frac) {
            return Err(CliError::Config(format!(
                "[sim] jitter_frac must lie in [0, 1), got {}",
                self.sim.jitter_frac
            )));
        }
        if self.train.seeds.is_empty() {
            return Err(CliError::Config("[train] seeds must not be empty".into()));
        }
        Ok(())
    }

    pub fn workload(&self) -> Result<Workload> {
        let mut spec = ScenarioSpec::new(
            self.workload.scenario,
            self.workload.cores,
            self.workload.period_s,
        );
        spec.io_wait_s = self.workload.io_wait_s;
        spec.target_runtime_s = self.workload.target_runtime_s;
        scenario(&spec).map_err(|e| CliError::Config(format!("[workload]: {e}")))
    }

    pub fn table(&self) -> FrequencyTable {
        self.table.clone().unwrap_or_else(FrequencyTable::jetson2)
    }

    pub fn power(&self) -> PowerParams {
        self.power.unwrap_or_default()
    }

    pub fn sim(&self, stop: StopMode) -> SimConfig {
        SimConfig {
            sampling_period_s: self.sim.sampling_period_s,
            stop,
            jitter_frac: self.sim.jitter_frac,
        }
    }

    pub fn layout(&self) -> Result<StateLayout> {
        StateLayout::parse(&self.train.layout)
            .map_err(|e| CliError::Config(format!("[train] layout: {e}")))
    }

    pub fn interval_uppers(&self) -> Vec<f64> {
        self.train
            .interval_uppers
            .clone()
            .unwrap_or_else(|| TrainConfig::default().interval_uppers)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let defaults = TrainConfig::default();
        Ok(TrainConfig {
            episodes: self.train.episodes,
            hidden: self.train.hidden.clone(),
            layout: self.layout()?,
            gamma: self.train.gamma.unwrap_or(defaults.gamma),
            learning_rate: self.train.learning_rate.unwrap_or(defaults.learning_rate),
            eval_episodes: self.train.eval_episodes.unwrap_or(defaults.eval_episodes),
            jitter_frac: self.train.jitter_frac.unwrap_or(self.sim.jitter_frac),
            interval_uppers: self.interval_uppers(),
            ..defaults
        })
    }
}
