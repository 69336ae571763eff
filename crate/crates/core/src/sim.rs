//! Deterministic period-by-period simulation of a workload under a governor.
//!
//! Time advances in sampling periods. Within a period the cores chew through
//! the workload's phases at the frequency the governor chose; at the period
//! boundary the governor sees what happened (per-core busy fractions collapsed
//! to average and peak) and picks the operating point for the next period.
//! Everything is pure arithmetic over `f64`, so a given (workload, governor,
//! seed) triple always reproduces the same trace bit for bit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::governor::Governor;
use crate::power::{energy_of_trace, EnergyReport, FreqLevel, FrequencyTable, PowerParams, TraceSegment};
use crate::workload::{Phase, Workload};

/// Tolerance for "has the clock reached this boundary" comparisons.
const TIME_EPS: f64 = 1e-12;
/// Tolerance for deadline comparisons.
const DEADLINE_EPS: f64 = 1e-9;

/// What one sampling period looked like.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Operating point the period ran at.
    pub freq: FreqLevel,
    /// Mean busy fraction across cores.
    pub util_avg: f64,
    /// Peak busy fraction across cores.
    pub util_max: f64,
    /// Actual length of the period (the final one may be partial).
    pub elapsed_s: f64,
}

/// One simulated period: when it ended, what level it ran at, what was
/// observed, and the raw per-core busy fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStep {
    pub t_end_s: f64,
    pub level_idx: usize,
    pub obs: Observation,
    pub per_core_util: Vec<f64>,
}

/// When an episode ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopMode {
    /// At the deadline, even if work remains (training view).
    AtDeadline,
    /// When the workload completes, even past the deadline (timing view).
    OnCompletion,
    /// At the later of completion and the deadline, so energy always covers
    /// the full period including the idle tail (comparison view).
    #[default]
    WholePeriod,
}

/// Simulation knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub sampling_period_s: f64,
    pub stop: StopMode,
    /// Optional +/- fractional jitter on each period length, drawn from the
    /// episode seed; zero keeps periods exact.
    pub jitter_frac: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            sampling_period_s: 0.02,
            stop: StopMode::WholePeriod,
            jitter_frac: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.sampling_period_s.is_finite() || self.sampling_period_s <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "sampling period {} s must be finite and positive",
                self.sampling_period_s
            )));
        }
        if !self.jitter_frac.is_finite() || !(0.0..=0.5).contains(&self.jitter_frac) {
            return Err(Error::InvalidConfig(format!(
                "jitter fraction {} must lie in [0, 0.5]",
                self.jitter_frac
            )));
        }
        Ok(())
    }
}

/// Everything a finished episode exposes.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub steps: Vec<SimStep>,
    /// Exact time the last phase finished; `None` when the episode was cut
    /// off at the deadline with work remaining.
    pub completion_time_s: Option<f64>,
    pub deadline_met: bool,
    /// Total simulated time (sum of step lengths).
    pub horizon_s: f64,
    /// Wall seconds spent at each table level, indexed like the table.
    pub level_seconds: Vec<f64>,
    /// Integral of average utilization over the horizon.
    pub util_time_integral_s: f64,
    pub energy: EnergyReport,
}

/// Phase-execution cursor.
struct ExecState {
    phase_idx: usize,
    /// Remaining giga-cycles per core within the current compute phase.
    core_rem: Vec<f64>,
    /// Remaining wall-time floor within the current compute phase (a
    /// concurrent capture that must run out before the phase can end).
    wall_rem: f64,
    /// Remaining wall seconds within the current wait phase.
    io_rem: f64,
}

impl ExecState {
    fn new(workload: &Workload) -> Self {
        let mut s = Self {
            phase_idx: 0,
            core_rem: vec![0.0; workload.cores],
            wall_rem: 0.0,
            io_rem: 0.0,
        };
        s.load_phase(workload);
        s
    }

    fn load_phase(&mut self, workload: &Workload) {
        if let Some(phase) = workload.phases.get(self.phase_idx) {
            match phase {
                Phase::Compute {
                    cycles_gc,
                    min_wall_s,
                } => {
                    self.core_rem.copy_from_slice(cycles_gc);
                    self.wall_rem = *min_wall_s;
                }
                Phase::IoWait { wall_s } => self.io_rem = *wall_s,
            }
        }
    }

    fn done(&self, workload: &Workload) -> bool {
        self.phase_idx >= workload.phases.len()
    }

    /// Advance through phases for at most `budget` seconds at `freq_ghz`.
    /// Returns per-core busy seconds within the advanced window and the
    /// seconds actually consumed; consuming less than the budget means every
    /// phase finished.
    fn advance(&mut self, workload: &Workload, freq_ghz: f64, budget: f64) -> (Vec<f64>, f64) {
        let mut busy = vec![0.0; workload.cores];
        let mut left = budget;
        while left > TIME_EPS && !self.done(workload) {
            match &workload.phases[self.phase_idx] {
                Phase::Compute { .. } => {
                    // The phase ends when the slowest core finishes *and* any
                    // concurrent capture has run out; cores idle in between.
                    let busy_need = self
                        .core_rem
                        .iter()
                        .map(|rem| rem / freq_ghz)
                        .fold(0.0, f64::max);
                    let need = busy_need.max(self.wall_rem);
                    if need <= left + TIME_EPS {
                        // Phase finishes inside the window; each core was busy
                        // for exactly its own share.
                        for (b, rem) in busy.iter_mut().zip(self.core_rem.iter_mut()) {
                            *b += *rem / freq_ghz;
                            *rem = 0.0;
                        }
                        left -= need;
                        self.phase_idx += 1;
                        self.load_phase(workload);
                    } else {
                        for (b, rem) in busy.iter_mut().zip(self.core_rem.iter_mut()) {
                            let worked = (*rem / freq_ghz).min(left);
                            *b += worked;
                            *rem = (*rem - worked * freq_ghz).max(0.0);
                        }
                        self.wall_rem = (self.wall_rem - left).max(0.0);
                        left = 0.0;
                    }
                }
                Phase::IoWait { .. } => {
                    let waited = self.io_rem.min(left);
                    self.io_rem -= waited;
                    left -= waited;
                    if self.io_rem <= TIME_EPS {
                        self.phase_idx += 1;
                        self.load_phase(workload);
                    }
                }
            }
        }
        (busy, budget - left.max(0.0))
    }
}

fn resolve_level(table: &FrequencyTable, level: FreqLevel) -> Result<usize> {
    table
        .index_of(level.freq_ghz)
        .ok_or(Error::GovernorProtocol {
            got_ghz: level.freq_ghz,
        })
}

/// Run one episode of `workload` under `governor`.
///
/// The seed only feeds the optional period jitter; with `jitter_frac == 0`
/// the simulation is seed-independent. A governor answering with a frequency
/// outside the table aborts the episode with a protocol error.
pub fn run_episode(
    workload: &Workload,
    governor: &mut dyn Governor,
    table: &FrequencyTable,
    params: &PowerParams,
    cfg: &SimConfig,
    seed: u64,
) -> Result<EpisodeResult> {
    workload.validate()?;
    cfg.validate()?;
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = workload.period_s;

    governor.reset();
    let mut level_idx = resolve_level(table, governor.start(table))?;

    let mut exec = ExecState::new(workload);
    let mut t = 0.0_f64;
    let mut completion: Option<f64> = None;
    let mut steps: Vec<SimStep> = Vec::new();
    let mut segments: Vec<TraceSegment> = Vec::new();
    let mut level_seconds = vec![0.0; table.len()];
    let mut util_integral = 0.0_f64;

    loop {
        let nominal = if cfg.jitter_frac > 0.0 {
            cfg.sampling_period_s * (1.0 + cfg.jitter_frac * rng.random_range(-1.0..=1.0))
        } else {
            cfg.sampling_period_s
        };

        let done_before = exec.done(workload);
        // Budget for phase execution this period.
        let budget = match cfg.stop {
            StopMode::AtDeadline => nominal.min(period - t),
            StopMode::OnCompletion | StopMode::WholePeriod => nominal,
        };
        if budget <= TIME_EPS {
            break;
        }

        let freq = table.level(level_idx);
        let (busy, consumed) = exec.advance(workload, freq.freq_ghz, budget);
        let finished_now = !done_before && exec.done(workload);
        if finished_now {
            completion = Some(t + consumed);
        }

        // How long this period actually lasts, by stop mode.
        let step_len = match cfg.stop {
            // Idle out the full (capped) budget.
            StopMode::AtDeadline => budget,
            StopMode::OnCompletion => {
                if exec.done(workload) {
                    consumed
                } else {
                    budget
                }
            }
            StopMode::WholePeriod => {
                if let Some(c) = completion {
                    if c >= period - DEADLINE_EPS {
                        // Completion is the horizon; end the period there.
                        consumed.max(c - t)
                    } else {
                        // Fill the idle tail, but never past the deadline.
                        budget.min(period - t)
                    }
                } else {
                    budget
                }
            }
        };
        if step_len <= TIME_EPS {
            break;
        }

        let per_core_util: Vec<f64> = busy.iter().map(|b| (b / step_len).min(1.0)).collect();
        let util_avg = per_core_util.iter().sum::<f64>() / workload.cores as f64;
        let util_max = per_core_util.iter().cloned().fold(0.0, f64::max);
        let obs = Observation {
            freq,
            util_avg,
            util_max,
            elapsed_s: step_len,
        };

        t += step_len;
        level_seconds[level_idx] += step_len;
        util_integral += util_avg * step_len;
        segments.push(TraceSegment {
            level: freq,
            util_avg,
            duration_s: step_len,
        });
        steps.push(SimStep {
            t_end_s: t,
            level_idx,
            obs: obs.clone(),
            per_core_util,
        });

        let stop = match cfg.stop {
            StopMode::AtDeadline => t >= period - TIME_EPS,
            StopMode::OnCompletion => exec.done(workload),
            StopMode::WholePeriod => exec.done(workload) && t >= period - DEADLINE_EPS,
        };
        if stop {
            break;
        }

        level_idx = resolve_level(table, governor.next(&obs, table))?;
    }

    let deadline_met = completion.map_or(false, |c| c <= period + DEADLINE_EPS);
    Ok(EpisodeResult {
        completion_time_s: completion,
        deadline_met,
        horizon_s: t,
        level_seconds,
        util_time_integral_s: util_integral,
        energy: energy_of_trace(&segments, params),
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::governor::{Conservative, Ondemand, StaticGovernor};
    use crate::power::FrequencyTable;
    use crate::workload::{scenario, Phase, ScenarioName, ScenarioSpec, Workload};

    fn table() -> FrequencyTable {
        FrequencyTable::jetson2()
    }

    fn params() -> PowerParams {
        PowerParams::default()
    }

    fn cfg(stop: StopMode) -> SimConfig {
        SimConfig {
            stop,
            ..SimConfig::default()
        }
    }

    fn one_core_burn(period_s: f64) -> Workload {
        Workload::new("burn", 1, period_s, vec![Phase::compute(vec![1.479])]).unwrap()
    }

    #[test]
    fn fixed_top_frequency_finishes_in_one_second() {
        let w = one_core_burn(1.2);
        let mut g = StaticGovernor::performance();
        let r = run_episode(&w, &mut g, &table(), &params(), &cfg(StopMode::OnCompletion), 0)
            .unwrap();
        let c = r.completion_time_s.unwrap();
        assert!((c - 1.0).abs() <= 0.02, "completion {c}");
        assert!(r.deadline_met);
        // Every full busy period observes a saturated core.
        for step in &r.steps[..r.steps.len() - 1] {
            assert!((step.obs.util_max - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn fixed_bottom_frequency_scales_runtime_by_ratio() {
        let w = one_core_burn(6.0);
        let mut g = StaticGovernor::powersave();
        let r = run_episode(&w, &mut g, &table(), &params(), &cfg(StopMode::OnCompletion), 0)
            .unwrap();
        let c = r.completion_time_s.unwrap();
        let expect = 1.479 / 0.307;
        assert!((c - expect).abs() <= 0.03, "completion {c} vs {expect}");
    }

    #[test]
    fn io_phase_shows_zero_utilization() {
        let w = Workload::new(
            "io_then_work",
            2,
            2.0,
            vec![Phase::IoWait { wall_s: 0.6 }, Phase::compute(vec![0.3, 0.3])],
        )
        .unwrap();
        let mut g = Ondemand::default();
        let r = run_episode(&w, &mut g, &table(), &params(), &cfg(StopMode::OnCompletion), 0)
            .unwrap();
        for step in &r.steps {
            if step.t_end_s <= 0.6 + 1e-9 {
                assert_eq!(step.obs.util_max, 0.0, "idle during the wait window");
            }
        }
        assert!(r.completion_time_s.is_some());
    }

    #[test]
    fn governor_outside_table_is_protocol_error() {
        struct Rogue;
        impl Governor for Rogue {
            fn name(&self) -> &str {
                "rogue"
            }
            fn next(&mut self, _obs: &Observation, _table: &FrequencyTable) -> FreqLevel {
                FreqLevel {
                    freq_ghz: 9.9,
                    volts: 1.0,
                }
            }
            fn reset(&mut self) {}
        }
        let w = one_core_burn(1.2);
        let err = run_episode(
            &w,
            &mut Rogue,
            &table(),
            &params(),
            &cfg(StopMode::OnCompletion),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::GovernorProtocol { .. }));
    }

    #[test]
    fn pinned_out_of_range_is_protocol_error() {
        let w = one_core_burn(1.2);
        let mut g = StaticGovernor::pinned(7);
        let err = run_episode(&w, &mut g, &table(), &params(), &cfg(StopMode::OnCompletion), 0)
            .unwrap_err();
        assert!(matches!(err, Error::GovernorProtocol { .. }));
    }

    #[test]
    fn same_seed_reproduces_jittered_episode_exactly() {
        let spec = ScenarioSpec::new(ScenarioName::FaceRecogLike, 4, 0.9);
        let w = scenario(&spec).unwrap();
        let mut c = cfg(StopMode::WholePeriod);
        c.jitter_frac = 0.2;
        let mut g1 = Ondemand::default();
        let mut g2 = Ondemand::default();
        let r1 = run_episode(&w, &mut g1, &table(), &params(), &c, 42).unwrap();
        let r2 = run_episode(&w, &mut g2, &table(), &params(), &c, 42).unwrap();
        assert_eq!(r1, r2);
        let mut g3 = Ondemand::default();
        let r3 = run_episode(&w, &mut g3, &table(), &params(), &c, 43).unwrap();
        assert_ne!(r1.steps, r3.steps);
    }

    #[test]
    fn work_is_conserved_across_governors() {
        let spec = ScenarioSpec::new(ScenarioName::FaceRecogLike, 4, 0.9);
        let w = scenario(&spec).unwrap();
        let total = w.total_cycles_gc();
        for gov in [
            Box::new(StaticGovernor::performance()) as Box<dyn Governor>,
            Box::new(StaticGovernor::powersave()),
            Box::new(Ondemand::default()) as Box<dyn Governor>,
            Box::new(Conservative::default()),
        ] {
            let mut gov = gov;
            let r = run_episode(
                &w,
                gov.as_mut(),
                &table(),
                &params(),
                &cfg(StopMode::OnCompletion),
                0,
            )
            .unwrap();
            let burned: f64 = r
                .steps
                .iter()
                .map(|s| {
                    let f = s.obs.freq.freq_ghz;
                    s.per_core_util
                        .iter()
                        .map(|u| u * s.obs.elapsed_s * f)
                        .sum::<f64>()
                })
                .sum();
            assert!(
                (burned - total).abs() <= 1e-6,
                "{}: burned {burned} of {total} giga-cycles",
                gov.name()
            );
        }
    }

    #[test]
    fn io_wall_time_is_governor_invariant() {
        let w = Workload::new(
            "work_io_work",
            2,
            4.0,
            vec![
                Phase::compute(vec![0.2958, 0.2958]),
                Phase::IoWait { wall_s: 0.25 },
                Phase::compute(vec![0.1479, 0.0]),
            ],
        )
        .unwrap();
        // Completion minus pure-compute time equals the wait wall time for
        // any governor.
        for (gov, compute_s) in [
            (
                Box::new(StaticGovernor::performance()) as Box<dyn Governor>,
                0.3,
            ),
            (Box::new(StaticGovernor::powersave()), 0.3 * 1.479 / 0.307),
        ] {
            let mut gov = gov;
            let r = run_episode(
                &w,
                gov.as_mut(),
                &table(),
                &params(),
                &cfg(StopMode::OnCompletion),
                0,
            )
            .unwrap();
            let c = r.completion_time_s.unwrap();
            assert!(
                (c - compute_s - 0.25).abs() <= 1e-6,
                "{}: completion {c}, compute {compute_s}",
                gov.name()
            );
        }
    }

    #[test]
    fn recording_floor_hides_fast_compute_but_not_slow() {
        let mut spec = ScenarioSpec::new(ScenarioName::AudioRecogLike, 4, 1.0);
        spec.io_wait_s = Some(0.6);
        let w = scenario(&spec).unwrap();
        // At the top clock the photo compute (0.35 s) finishes inside the
        // 0.6 s recording, so the request takes 0.6 + 0.28 s.
        let mut fast = StaticGovernor::performance();
        let r = run_episode(&w, &mut fast, &table(), &params(), &cfg(StopMode::OnCompletion), 0)
            .unwrap();
        let c = r.completion_time_s.unwrap();
        assert!((c - 0.88).abs() <= 1e-9, "completion {c}");
        // Cores go idle between compute completion and the end of the
        // recording.
        let idle_before_recording_end: f64 = r
            .steps
            .iter()
            .filter(|s| s.obs.util_max == 0.0 && s.t_end_s <= 0.6 + 1e-9)
            .map(|s| s.obs.elapsed_s)
            .sum();
        assert!(
            idle_before_recording_end >= 0.2,
            "idle window {idle_before_recording_end}"
        );
        // At the bottom clock the compute outlasts the recording and the
        // floor never binds: 0.63 s of compute stretched by the clock ratio.
        let mut slow = StaticGovernor::powersave();
        let r = run_episode(&w, &mut slow, &table(), &params(), &cfg(StopMode::OnCompletion), 0)
            .unwrap();
        let c = r.completion_time_s.unwrap();
        let expect = 0.63 * 1.479 / 0.307;
        assert!((c - expect).abs() <= 1e-6, "completion {c} vs {expect}");
    }

    #[test]
    fn deadline_truncation_leaves_completion_unknown() {
        let w = one_core_burn(0.5); // needs 1 s at the top clock
        let mut g = StaticGovernor::performance();
        let r = run_episode(&w, &mut g, &table(), &params(), &cfg(StopMode::AtDeadline), 0)
            .unwrap();
        assert_eq!(r.completion_time_s, None);
        assert!(!r.deadline_met);
        assert!((r.horizon_s - 0.5).abs() <= 1e-9);
    }

    #[test]
    fn whole_period_fills_idle_tail_to_deadline() {
        let spec = ScenarioSpec::new(ScenarioName::FaceRecogLike, 4, 0.9);
        let w = scenario(&spec).unwrap();
        let mut g = StaticGovernor::performance();
        let r = run_episode(&w, &mut g, &table(), &params(), &cfg(StopMode::WholePeriod), 0)
            .unwrap();
        assert!((r.horizon_s - 0.9).abs() <= 1e-9);
        let c = r.completion_time_s.unwrap();
        assert!((c - 0.35).abs() <= 1e-6);
        assert!(r.deadline_met);
        // The tail idles at the chosen level with zero utilization.
        let last = r.steps.last().unwrap();
        assert_eq!(last.obs.util_max, 0.0);
    }

    #[test]
    fn whole_period_extends_past_missed_deadline() {
        let w = one_core_burn(0.5);
        let mut g = StaticGovernor::performance();
        let r = run_episode(&w, &mut g, &table(), &params(), &cfg(StopMode::WholePeriod), 0)
            .unwrap();
        let c = r.completion_time_s.unwrap();
        assert!(!r.deadline_met);
        assert!((c - 1.0).abs() <= 0.02);
        assert!((r.horizon_s - c).abs() <= 1e-9);
    }

    #[test]
    fn energy_report_matches_level_seconds() {
        let spec = ScenarioSpec::new(ScenarioName::FaceRecogLike, 4, 0.9);
        let w = scenario(&spec).unwrap();
        let mut g = Ondemand::default();
        let r = run_episode(&w, &mut g, &table(), &params(), &cfg(StopMode::WholePeriod), 0)
            .unwrap();
        let total_level: f64 = r.level_seconds.iter().sum();
        assert!((total_level - r.horizon_s).abs() <= 1e-9);
        assert!((r.energy.duration_s - r.horizon_s).abs() <= 1e-9);
        assert!(r.energy.total_j() > 0.0);
    }

    #[test]
    fn rejects_bad_sim_config() {
        let mut c = SimConfig::default();
        c.sampling_period_s = 0.0;
        assert!(c.validate().is_err());
        let mut c = SimConfig::default();
        c.jitter_frac = 0.9;
        assert!(c.validate().is_err());
    }
}
