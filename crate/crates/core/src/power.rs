//! CPU power model and trace energy accounting.
//!
//! Power at an operating point splits into three parts: a frequency-independent
//! board floor, a static leakage term that grows with the square of the rail
//! voltage, and a dynamic switching term proportional to `V^2 * f`, weighted by
//! how busy the cores actually were. The square-law voltage dependence is what
//! makes downscaling pay off on hardware whose voltage drops with frequency:
//! running the same cycles slower at a lower voltage costs quadratically less
//! switching energy per cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One hardware operating point: a clock frequency and the rail voltage it
/// requires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqLevel {
    pub freq_ghz: f64,
    pub volts: f64,
}

#[derive(Deserialize)]
struct RawTable {
    levels: Vec<FreqLevel>,
}

impl TryFrom<RawTable> for FrequencyTable {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<Self> {
        FrequencyTable::new(raw.levels)
    }
}

/// Ordered list of supported operating points, lowest frequency first.
///
/// Frequencies are strictly increasing and voltages non-decreasing; both are
/// finite and positive. At least two levels are required so that "lowest" and
/// "highest" are distinct policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct FrequencyTable {
    levels: Vec<FreqLevel>,
}

impl FrequencyTable {
    pub fn new(levels: Vec<FreqLevel>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidTable(format!(
                "need at least 2 levels, got {}",
                levels.len()
            )));
        }
        for level in &levels {
            if !level.freq_ghz.is_finite() || level.freq_ghz <= 0.0 {
                return Err(Error::InvalidTable(format!(
                    "frequency {} GHz is not finite and positive",
                    level.freq_ghz
                )));
            }
            if !level.volts.is_finite() || level.volts <= 0.0 {
                return Err(Error::InvalidTable(format!(
                    "voltage {} V is not finite and positive",
                    level.volts
                )));
            }
        }
        for pair in levels.windows(2) {
            if pair[1].freq_ghz <= pair[0].freq_ghz {
                return Err(Error::InvalidTable(format!(
                    "frequencies must be strictly increasing ({} GHz after {} GHz)",
                    pair[1].freq_ghz, pair[0].freq_ghz
                )));
            }
            if pair[1].volts < pair[0].volts {
                return Err(Error::InvalidTable(format!(
                    "voltages must be non-decreasing ({} V after {} V)",
                    pair[1].volts, pair[0].volts
                )));
            }
        }
        Ok(Self { levels })
    }

    /// The default two-point table modeled on a Jetson Nano class board:
    /// only the extreme frequencies run at distinct voltages.
    pub fn jetson2() -> Self {
        Self::new(vec![
            FreqLevel {
                freq_ghz: 0.307,
                volts: 0.80,
            },
            FreqLevel {
                freq_ghz: 1.479,
                volts: 1.10,
            },
        ])
        .expect("built-in table is valid")
    }

    pub fn levels(&self) -> &[FreqLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, idx: usize) -> FreqLevel {
        self.levels[idx]
    }

    pub fn min_level(&self) -> FreqLevel {
        self.levels[0]
    }

    pub fn max_level(&self) -> FreqLevel {
        self.levels[self.levels.len() - 1]
    }

    pub fn min_freq_ghz(&self) -> f64 {
        self.levels[0].freq_ghz
    }

    pub fn max_freq_ghz(&self) -> f64 {
        self.levels[self.levels.len() - 1].freq_ghz
    }

    /// Index of the level whose frequency equals `freq_ghz` exactly.
    pub fn index_of(&self, freq_ghz: f64) -> Option<usize> {
        self.levels.iter().position(|l| l.freq_ghz == freq_ghz)
    }

    /// Highest level whose frequency does not exceed `target_ghz`; the lowest
    /// level when every table frequency is above the target.
    pub fn floor_level(&self, target_ghz: f64) -> usize {
        let mut best = 0;
        for (idx, level) in self.levels.iter().enumerate() {
            if level.freq_ghz <= target_ghz {
                best = idx;
            }
        }
        best
    }

    /// Frequency of `idx` mapped onto `[0, 1]` between the table extremes.
    pub fn freq_normalized(&self, idx: usize) -> f64 {
        (self.levels[idx].freq_ghz - self.min_freq_ghz())
            / (self.max_freq_ghz() - self.min_freq_ghz())
    }

    /// Stable integrity tag over the exact operating points, used to detect
    /// a model trained against a different table.
    pub fn fingerprint(&self) -> String {
        let mut canon = String::new();
        for level in &self.levels {
            canon.push_str(&format!("{:.6}:{:.6};", level.freq_ghz, level.volts));
        }
        format!("{:016x}", fnv1a64(canon.as_bytes()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("table serializes")
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[derive(Deserialize)]
struct RawParams {
    switch_capacitance: f64,
    static_current_per_volt: f64,
    base_board_power_w: f64,
}

impl TryFrom<RawParams> for PowerParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        let p = PowerParams {
            switch_capacitance: raw.switch_capacitance,
            static_current_per_volt: raw.static_current_per_volt,
            base_board_power_w: raw.base_board_power_w,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Coefficients of the three power components.
///
/// * `switch_capacitance` — effective switched capacitance times activity,
///   in W / (V^2 * GHz); scales the dynamic term `aC * V^2 * f * util`.
/// * `static_current_per_volt` — leakage current per volt of rail voltage,
///   in A/V; the static term is `I(V) * V = k * V^2`.
/// * `base_board_power_w` — board floor drawn regardless of the CPU rail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct PowerParams {
    pub switch_capacitance: f64,
    pub static_current_per_volt: f64,
    pub base_board_power_w: f64,
}

impl Default for PowerParams {
    /// Calibrated against the two-point Jetson-class table so that the board
    /// idles 36% lower at the bottom voltage than at the top one
    /// (1.52 W vs 2.375 W) and draws roughly twice the power fully busy at
    /// the top point than at the bottom (3.234 W vs 1.614 W).
    fn default() -> Self {
        Self {
            switch_capacitance: 0.48,
            static_current_per_volt: 1.5,
            base_board_power_w: 0.56,
        }
    }
}

impl PowerParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("switch_capacitance", self.switch_capacitance),
            ("static_current_per_volt", self.static_current_per_volt),
            ("base_board_power_w", self.base_board_power_w),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "power parameter {name} = {v} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("params serialize")
    }
}

/// Instantaneous board power at `level` with the given average core
/// utilization over the interval of interest.
///
/// `util_avg` must lie in `[0, 1]`. The dynamic term is weighted by the
/// average utilization, so intervals that keep more cores busy cost
/// proportionally more switching power at the same operating point.
pub fn instant_power(level: FreqLevel, util_avg: f64, params: &PowerParams) -> f64 {
    debug_assert!(
        (-1e-9..=1.0 + 1e-9).contains(&util_avg),
        "utilization {util_avg} outside [0, 1]"
    );
    let v2 = level.volts * level.volts;
    params.base_board_power_w
        + params.static_current_per_volt * v2
        + params.switch_capacitance * v2 * level.freq_ghz * util_avg
}

/// One piecewise-constant span of an execution trace: the operating point,
/// the average utilization across the span, and its wall duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSegment {
    pub level: FreqLevel,
    pub util_avg: f64,
    pub duration_s: f64,
}

/// Energy accounted over a trace, split by component, with the wall time
/// spent at each distinct operating point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyReport {
    pub dynamic_j: f64,
    pub static_j: f64,
    pub base_j: f64,
    pub duration_s: f64,
    /// Seconds per operating point, grouped by exact level equality in
    /// first-seen order.
    pub level_seconds: Vec<(FreqLevel, f64)>,
}

impl EnergyReport {
    pub fn total_j(&self) -> f64 {
        self.dynamic_j + self.static_j + self.base_j
    }

    /// Fractions of the report duration spent at each operating point.
    /// Empty report (zero duration) has no shares.
    pub fn level_time_shares(&self) -> Vec<(FreqLevel, f64)> {
        if self.duration_s <= 0.0 {
            return Vec::new();
        }
        self.level_seconds
            .iter()
            .map(|&(l, s)| (l, s / self.duration_s))
            .collect()
    }
}

/// Integrate the power model over a piecewise-constant trace.
///
/// Energy is additive over segments; since power is linear in utilization,
/// a span at its average utilization accounts exactly the same energy as
/// the varying original.
pub fn energy_of_trace(segments: &[TraceSegment], params: &PowerParams) -> EnergyReport {
    let mut report = EnergyReport::default();
    for seg in segments {
        debug_assert!(seg.duration_s >= 0.0, "negative segment duration");
        let v2 = seg.level.volts * seg.level.volts;
        report.base_j += params.base_board_power_w * seg.duration_s;
        report.static_j += params.static_current_per_volt * v2 * seg.duration_s;
        report.dynamic_j +=
            params.switch_capacitance * v2 * seg.level.freq_ghz * seg.util_avg * seg.duration_s;
        report.duration_s += seg.duration_s;
        match report
            .level_seconds
            .iter_mut()
            .find(|(l, _)| *l == seg.level)
        {
            Some((_, s)) => *s += seg.duration_s,
            None => report.level_seconds.push((seg.level, seg.duration_s)),
        }
    }
    report
}
