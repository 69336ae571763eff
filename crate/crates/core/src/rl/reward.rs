//! Terminal reward: score an episode only when the deadline was met.
//!
//! A miss scores exactly zero.  Otherwise the score averages two terms over
//! the whole period, each already in `[0, 1]`:
//!
//! * a frequency term that weights time spent at each operating point by how
//!   far that point's *cubed* clock sits below the fastest one's (cubic,
//!   because dynamic power scales roughly with f·V² and V tracks f), and
//! * a utilization term, the time integral of mean core utilization divided
//!   by the period, so idle tail time counts as zero usefulness.

use crate::power::FrequencyTable;
use crate::sim::EpisodeResult;

/// Reward for one completed period.  `deadline_s` is the full scheduling
/// period; episodes that ran past it (or never finished) return 0.
pub fn compute_reward(episode: &EpisodeResult, table: &FrequencyTable, deadline_s: f64) -> f64 {
    if !episode.deadline_met {
        return 0.0;
    }
    let f_min = table.min_freq_ghz();
    let f_max = table.max_freq_ghz();
    let cube_span = f_max.powi(3) - f_min.powi(3);

    let mut r_freq = 0.0;
    for (idx, &secs) in episode.level_seconds.iter().enumerate() {
        if secs <= 0.0 {
            continue;
        }
        let f = table.level(idx).freq_ghz;
        let penalty = if cube_span > 0.0 {
            (f.powi(3) - f_min.powi(3)) / cube_span
        } else {
            0.0
        };
        r_freq += (1.0 - penalty) * (secs / deadline_s);
    }
    // Time not covered by the horizon (an episode stopped early) counts as
    // spent at an unspecified point with zero credit, which only happens in
    // truncated runs that already scored 0 above via the deadline flag.
    let r_util = episode.util_time_integral_s / deadline_s;

    0.5 * r_freq + 0.5 * r_util
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::governor::StaticGovernor;
    use crate::power::PowerParams;
    use crate::sim::{run_episode, SimConfig, StopMode};
    use crate::workload::{Phase, Workload};

    fn table() -> FrequencyTable {
        FrequencyTable::jetson2()
    }

    fn synthetic(level_secs: Vec<f64>, util_integral: f64, met: bool) -> EpisodeResult {
        EpisodeResult {
            steps: Vec::new(),
            completion_time_s: Some(0.5),
            deadline_met: met,
            horizon_s: 1.0,
            level_seconds: level_secs,
            util_time_integral_s: util_integral,
            energy: crate::power::EnergyReport {
                dynamic_j: 0.0,
                static_j: 0.0,
                base_j: 0.0,
                duration_s: 1.0,
                level_seconds: Vec::new(),
            },
        }
    }

    #[test]
    fn missed_deadline_scores_zero() {
        let ep = synthetic(vec![0.0, 1.0], 1.0, false);
        assert_eq!(compute_reward(&ep, &table(), 1.0), 0.0);
    }

    #[test]
    fn slowest_level_fully_busy_scores_one() {
        // Entire period at the lowest operating point, all cores saturated.
        let ep = synthetic(vec![1.0, 0.0], 1.0, true);
        let r = compute_reward(&ep, &table(), 1.0);
        assert!((r - 1.0).abs() <= 1e-12, "reward {r}");
    }

    #[test]
    fn fastest_level_idle_tail_scores_by_busy_share() {
        // Half the period at the top clock fully busy, half idle at the
        // bottom clock: frequency term = 0.5 * 1 (bottom half) + 0, and the
        // utilization integral covers only the busy half.
        let ep = synthetic(vec![0.5, 0.5], 0.5, true);
        let r = compute_reward(&ep, &table(), 1.0);
        assert!((r - (0.5 * 0.5 + 0.5 * 0.5)).abs() <= 1e-12, "reward {r}");
    }

    #[test]
    fn cubic_weighting_uses_cube_of_clock() {
        let t = FrequencyTable::from_toml_str(
            r#"levels = [
                { freq_ghz = 1.0, volts = 0.8 },
                { freq_ghz = 1.5, volts = 0.9 },
                { freq_ghz = 2.0, volts = 1.0 },
            ]"#,
        )
        .unwrap();
        // All time at the middle level, fully utilized.
        let ep = synthetic(vec![0.0, 1.0, 0.0], 1.0, true);
        let penalty = (1.5f64.powi(3) - 1.0) / (8.0 - 1.0);
        let expected = 0.5 * (1.0 - penalty) + 0.5;
        assert!((compute_reward(&ep, &t, 1.0) - expected).abs() <= 1e-12);
    }

    #[test]
    fn simulated_episode_reward_is_in_unit_interval() {
        let wl = Workload::new(
            "burst",
            2,
            0.6,
            vec![Phase::compute(vec![0.2, 0.2])],
        )
        .unwrap();
        let cfg = SimConfig {
            stop: StopMode::WholePeriod,
            ..SimConfig::default()
        };
        let mut gov = StaticGovernor::performance();
        let ep = run_episode(
            &wl,
            &mut gov,
            &table(),
            &PowerParams::default(),
            &cfg,
            0,
        )
        .unwrap();
        assert!(ep.deadline_met);
        let r = compute_reward(&ep, &table(), 0.6);
        assert!(r > 0.0 && r < 1.0, "reward {r}");
    }
}
