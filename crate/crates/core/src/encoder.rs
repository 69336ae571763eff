//! Running temporal summary of an episode, the input to the learned governor.
//!
//! Rather than feeding the policy a window of raw samples, each period folds
//! into a tiny fixed-size state: the last period's normalized frequency and
//! utilizations, plus deadline-relative accumulators — elapsed time, busy
//! time, and a histogram of where time was spent, binned by operating point
//! and peak-utilization band. The histogram rows sum to the elapsed-time
//! accumulator by construction, which makes the state cheap to sanity-check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::FrequencyTable;
use crate::sim::Observation;

/// How an encoded state is flattened for the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StateLayout {
    /// Drop the average utilization and collapse the histogram to per-level
    /// totals: `[freq_norm, util_max, elapsed, busy, level_time...]`.
    #[default]
    Compact,
    /// Keep every component:
    /// `[freq_norm, util_avg, util_max, elapsed, busy, histogram...]`.
    Full,
}

impl StateLayout {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "compact" => Ok(Self::Compact),
            "full" => Ok(Self::Full),
            other => Err(Error::InvalidConfig(format!(
                "unknown state layout {other:?} (expected compact or full)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Compact => "compact",
            Self::Full => "full",
        }
    }

    /// Flattened length for a table with `levels` points and `intervals`
    /// utilization bands.
    pub fn len(&self, levels: usize, intervals: usize) -> usize {
        match self {
            Self::Compact => 4 + levels,
            Self::Full => 5 + levels * intervals,
        }
    }
}

/// Encoder parameters: the table (for frequency normalization and histogram
/// rows), the peak-utilization band boundaries, and the deadline that scales
/// every accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub table: FrequencyTable,
    /// Upper bounds of the utilization bands; must be increasing and end at
    /// 1.0. The default two bands split at 60%.
    pub interval_uppers: Vec<f64>,
    pub deadline_s: f64,
}

impl EncoderConfig {
    pub fn new(table: FrequencyTable, deadline_s: f64) -> Result<Self> {
        Self::with_intervals(table, vec![0.6, 1.0], deadline_s)
    }

    pub fn with_intervals(
        table: FrequencyTable,
        interval_uppers: Vec<f64>,
        deadline_s: f64,
    ) -> Result<Self> {
        if !deadline_s.is_finite() || deadline_s <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "deadline {deadline_s} s must be finite and positive"
            )));
        }
        if interval_uppers.is_empty() {
            return Err(Error::InvalidConfig("no utilization bands".into()));
        }
        let mut prev = 0.0;
        for &u in &interval_uppers {
            if !(u > prev) || u > 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "utilization band bounds must increase within (0, 1], got {interval_uppers:?}"
                )));
            }
            prev = u;
        }
        if *interval_uppers.last().unwrap() != 1.0 {
            return Err(Error::InvalidConfig(
                "last utilization band must end at 1.0".into(),
            ));
        }
        Ok(Self {
            table,
            interval_uppers,
            deadline_s,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.table.len()
    }

    pub fn n_intervals(&self) -> usize {
        self.interval_uppers.len()
    }

    /// Band index for a peak utilization; upper bounds are inclusive, so with
    /// the default bands 0.6 falls in the lower one.
    pub fn interval_index(&self, util: f64) -> usize {
        for (i, &upper) in self.interval_uppers.iter().enumerate() {
            if util <= upper {
                return i;
            }
        }
        self.interval_uppers.len() - 1
    }
}

/// The running summary. Accumulators are fractions of the deadline, so a
/// finished on-time episode has `elapsed_frac` ~ 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedState {
    /// Last period's frequency mapped onto `[0, 1]`.
    pub freq_norm: f64,
    pub util_avg: f64,
    pub util_max: f64,
    /// Elapsed time / deadline.
    pub elapsed_frac: f64,
    /// Utilization-weighted time / deadline.
    pub busy_frac: f64,
    /// Row-major `[level][band]` histogram of elapsed time / deadline.
    pub histogram: Vec<f64>,
}

impl EncodedState {
    /// State at the start of an episode: nothing observed, nothing elapsed.
    pub fn zero(cfg: &EncoderConfig) -> Self {
        Self {
            freq_norm: 0.0,
            util_avg: 0.0,
            util_max: 0.0,
            elapsed_frac: 0.0,
            busy_frac: 0.0,
            histogram: vec![0.0; cfg.n_levels() * cfg.n_intervals()],
        }
    }

    /// Sum of one histogram row (all bands of one level).
    pub fn level_total(&self, cfg: &EncoderConfig, level_idx: usize) -> f64 {
        let n = cfg.n_intervals();
        self.histogram[level_idx * n..(level_idx + 1) * n].iter().sum()
    }
}

/// Fold one period into the summary.
///
/// The period's wall share `elapsed / deadline` goes into the elapsed-time
/// accumulator and into the histogram cell addressed by the period's
/// operating point and peak-utilization band; the busy accumulator grows by
/// the utilization-weighted share. The observed frequency must be a table
/// member.
pub fn encode_step(
    prev: &EncodedState,
    obs: &Observation,
    cfg: &EncoderConfig,
) -> Result<EncodedState> {
    let level_idx = cfg
        .table
        .index_of(obs.freq.freq_ghz)
        .ok_or(Error::UnknownFrequency {
            got_ghz: obs.freq.freq_ghz,
        })?;
    debug_assert!((0.0..=1.0 + 1e-9).contains(&obs.util_avg));
    debug_assert!((0.0..=1.0 + 1e-9).contains(&obs.util_max));
    let share = obs.elapsed_s / cfg.deadline_s;
    let mut next = prev.clone();
    next.freq_norm = cfg.table.freq_normalized(level_idx);
    next.util_avg = obs.util_avg;
    next.util_max = obs.util_max;
    next.elapsed_frac += share;
    next.busy_frac += share * obs.util_avg;
    let cell = level_idx * cfg.n_intervals() + cfg.interval_index(obs.util_max);
    next.histogram[cell] += share;
    Ok(next)
}

/// Flatten a state for the network input, in the documented feature order.
pub fn flatten(state: &EncodedState, layout: StateLayout, cfg: &EncoderConfig) -> Vec<f64> {
    match layout {
        StateLayout::Compact => {
            let mut out = Vec::with_capacity(4 + cfg.n_levels());
            out.extend_from_slice(&[
                state.freq_norm,
                state.util_max,
                state.busy_frac,
                state.elapsed_frac,
            ]);
            for level in 0..cfg.n_levels() {
                out.push(state.level_total(cfg, level));
            }
            out
        }
        StateLayout::Full => {
            let mut out = Vec::with_capacity(5 + state.histogram.len());
            out.extend_from_slice(&[
                state.freq_norm,
                state.util_avg,
                state.util_max,
                state.busy_frac,
                state.elapsed_frac,
            ]);
            out.extend_from_slice(&state.histogram);
            out
        }
    }
}
