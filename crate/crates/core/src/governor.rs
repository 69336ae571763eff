//! Frequency governors: the classic utilization-driven policies and the
//! trait they share with the learned one.
//!
//! Policies see one observation per sampling period (the period that just
//! ended) and answer with the operating point for the next one. The
//! utilization they react to is the peak across cores, so a single saturated
//! core is enough to drive the clock up.

use serde::{Deserialize, Serialize};

use crate::power::{FreqLevel, FrequencyTable};
use crate::sim::Observation;

/// A frequency policy driven by per-period observations.
pub trait Governor {
    fn name(&self) -> &str;

    /// Operating point for the very first period, before any observation.
    /// Defaults to the lowest level, matching a system that idled before the
    /// request arrived.
    fn start(&mut self, table: &FrequencyTable) -> FreqLevel {
        table.min_level()
    }

    /// Operating point for the next period given the one just finished.
    fn next(&mut self, obs: &Observation, table: &FrequencyTable) -> FreqLevel;

    /// Drop any per-episode state.
    fn reset(&mut self);
}

/// Tunables of the demand-proportional policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OndemandConfig {
    /// Peak utilization above which the policy jumps straight to the top.
    pub up_threshold: f64,
    /// Fraction shaved off the computed target frequency, `[0, 1]`.
    pub powersave_bias: f64,
}

impl Default for OndemandConfig {
    fn default() -> Self {
        Self {
            up_threshold: 0.8,
            powersave_bias: 0.0,
        }
    }
}

/// One decision of the demand-proportional policy.
///
/// Above the threshold the target is the top frequency; otherwise it is
/// `min_f + (max_f - min_f) * u`. The target is then discounted by the
/// powersave bias and snapped down to the highest supported frequency at or
/// below it (the lowest level when even that is too high).
pub fn ondemand_next(util: f64, cfg: &OndemandConfig, table: &FrequencyTable) -> FreqLevel {
    debug_assert!((-1e-9..=1.0 + 1e-9).contains(&util), "utilization {util}");
    let min_f = table.min_freq_ghz();
    let max_f = table.max_freq_ghz();
    let target = if util > cfg.up_threshold {
        max_f
    } else {
        min_f + (max_f - min_f) * util
    };
    let biased = (1.0 - cfg.powersave_bias) * target;
    table.level(table.floor_level(biased))
}

/// Demand-proportional governor reacting to peak core utilization.
#[derive(Debug, Clone, Default)]
pub struct Ondemand {
    pub cfg: OndemandConfig,
}

impl Ondemand {
    pub fn new(cfg: OndemandConfig) -> Self {
        Self { cfg }
    }
}

impl Governor for Ondemand {
    fn name(&self) -> &str {
        "ondemand"
    }

    fn next(&mut self, obs: &Observation, table: &FrequencyTable) -> FreqLevel {
        ondemand_next(obs.util_max, &self.cfg, table)
    }

    fn reset(&mut self) {}
}

/// Tunables of the stepwise policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservativeConfig {
    pub up_threshold: f64,
    pub down_threshold: f64,
    /// Levels moved per decision.
    pub step_levels: usize,
}

impl Default for ConservativeConfig {
    fn default() -> Self {
        Self {
            up_threshold: 0.8,
            down_threshold: 0.2,
            step_levels: 1,
        }
    }
}

/// Stepwise governor: walks one (configurable) level up when peak utilization
/// crosses the upper threshold, one level down when it falls below the lower
/// one, and otherwise holds.
#[derive(Debug, Clone, Default)]
pub struct Conservative {
    pub cfg: ConservativeConfig,
    current: usize,
}

impl Conservative {
    pub fn new(cfg: ConservativeConfig) -> Self {
        Self { cfg, current: 0 }
    }
}

impl Governor for Conservative {
    fn name(&self) -> &str {
        "conservative"
    }

    fn start(&mut self, table: &FrequencyTable) -> FreqLevel {
        self.current = 0;
        table.min_level()
    }

    fn next(&mut self, obs: &Observation, table: &FrequencyTable) -> FreqLevel {
        if obs.util_max > self.cfg.up_threshold {
            self.current = (self.current + self.cfg.step_levels).min(table.len() - 1);
        } else if obs.util_max < self.cfg.down_threshold {
            self.current = self.current.saturating_sub(self.cfg.step_levels);
        }
        table.level(self.current)
    }

    fn reset(&mut self) {
        self.current = 0;
    }
}

/// Tunable of the headroom-scaling policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedutilLikeConfig {
    /// Multiplier applied to `util * max_f`; the classic 25% headroom.
    pub margin: f64,
}

impl Default for SchedutilLikeConfig {
    fn default() -> Self {
        Self { margin: 1.25 }
    }
}

/// Headroom-scaling governor: targets `margin * util * max_f` and snaps down
/// to a supported frequency. Stateless, so it reacts instantly in both
/// directions. This is a simplified cousin of the kernel original (no
/// per-entity utilization tracking or rate limits), hence the `_like` suffix.
#[derive(Debug, Clone, Default)]
pub struct SchedutilLike {
    pub cfg: SchedutilLikeConfig,
}

impl SchedutilLike {
    pub fn new(cfg: SchedutilLikeConfig) -> Self {
        Self { cfg }
    }
}

impl Governor for SchedutilLike {
    fn name(&self) -> &str {
        "schedutil_like"
    }

    fn next(&mut self, obs: &Observation, table: &FrequencyTable) -> FreqLevel {
        let target = self.cfg.margin * obs.util_max * table.max_freq_ghz();
        table.level(table.floor_level(target))
    }

    fn reset(&mut self) {}
}

/// Which fixed level a [`StaticGovernor`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StaticLevel {
    Lowest,
    Highest,
    Pinned(usize),
}

/// Governor that never moves: the `performance` / `powersave` pair and
/// arbitrary pinned levels.
#[derive(Debug, Clone)]
pub struct StaticGovernor {
    which: StaticLevel,
}

impl StaticGovernor {
    pub fn performance() -> Self {
        Self {
            which: StaticLevel::Highest,
        }
    }

    pub fn powersave() -> Self {
        Self {
            which: StaticLevel::Lowest,
        }
    }

    pub fn pinned(idx: usize) -> Self {
        Self {
            which: StaticLevel::Pinned(idx),
        }
    }

    fn level(&self, table: &FrequencyTable) -> FreqLevel {
        match self.which {
            StaticLevel::Lowest => table.min_level(),
            StaticLevel::Highest => table.max_level(),
            // An out-of-range pin surfaces as a protocol error in the
            // simulator rather than a panic here.
            StaticLevel::Pinned(idx) => table
                .levels()
                .get(idx)
                .copied()
                .unwrap_or(FreqLevel {
                    freq_ghz: f64::INFINITY,
                    volts: f64::INFINITY,
                }),
        }
    }
}

impl Governor for StaticGovernor {
    fn name(&self) -> &str {
        match self.which {
            StaticLevel::Lowest => "powersave",
            StaticLevel::Highest => "performance",
            StaticLevel::Pinned(_) => "pinned",
        }
    }

    fn start(&mut self, table: &FrequencyTable) -> FreqLevel {
        self.level(table)
    }

    fn next(&mut self, _obs: &Observation, table: &FrequencyTable) -> FreqLevel {
        self.level(table)
    }

    fn reset(&mut self) {}
}
