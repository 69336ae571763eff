//! Subcommand implementations and the plumbing they share.

pub mod bench;
pub mod compare;
pub mod plot;
pub mod run;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use govlab::encoder::{EncoderConfig, StateLayout};
use govlab::power::{energy_of_trace, FrequencyTable, PowerParams, TraceSegment};
use govlab::rl::reward::compute_reward;
use govlab::sim::EpisodeResult;
use govlab::trace::{episode_records, write_trace, TraceRecord};
use govlab::workload::Workload;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

/// Output directory: the `--out` flag beats the config's `[output] dir`.
pub fn out_dir(cfg: &ExperimentConfig, flag: Option<&Path>) -> Result<PathBuf> {
    let dir = flag.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Reproducibility sidecar: invocation details followed by the resolved
/// configuration, so the run can be repeated from this file alone.
pub fn write_meta(
    dir: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    notes: &[(&str, String)],
) -> Result<()> {
    let mut text = String::from("[invocation]\n");
    text.push_str(&format!("command = {command:?}\n"));
    text.push_str(&format!("version = {:?}\n", env!("CARGO_PKG_VERSION")));
    text.push_str(&format!(
        "seeds = [{}]\n",
        seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    ));
    for (key, value) in notes {
        text.push_str(&format!("{key} = {value:?}\n"));
    }
    text.push('\n');
    text.push_str(
        &toml::to_string(cfg)
            .map_err(|e| CliError::Runtime(format!("cannot serialize config echo: {e}")))?,
    );
    fs::write(dir.join("meta.toml"), text)
        .map_err(|e| CliError::Runtime(format!("cannot write meta.toml: {e}")))?;
    Ok(())
}

/// Replay an episode into trace records and write them out.
pub fn emit_trace(
    path: &Path,
    episode: &EpisodeResult,
    workload: &Workload,
    encoder: &EncoderConfig,
    layout: StateLayout,
    table: &FrequencyTable,
) -> Result<Vec<TraceRecord>> {
    let reward = compute_reward(episode, table, workload.period_s);
    let records = episode_records(episode, encoder, reward)?;
    write_trace(path, &records, workload.cores.min(255) as u8, layout, 0)?;
    Ok(records)
}

/// Re-account energy from emitted trace records only: interval durations
/// from the timestamps, levels from the stored kilohertz, utilization from
/// the stored thousandths.
pub fn energy_from_records(
    records: &[TraceRecord],
    table: &FrequencyTable,
    power: &PowerParams,
) -> Result<f64> {
    let mut segments = Vec::with_capacity(records.len());
    let mut prev_us = 0u64;
    for rec in records {
        let level_idx = (0..table.len())
            .find(|&i| (table.level(i).freq_ghz * 1e6).round() as u32 == rec.freq_khz)
            .ok_or_else(|| {
                CliError::Runtime(format!(
                    "trace frequency {} kHz is not in the active table",
                    rec.freq_khz
                ))
            })?;
        segments.push(TraceSegment {
            level: table.level(level_idx),
            util_avg: f64::from(rec.util_avg_millis) / 1000.0,
            duration_s: (rec.timestamp_us - prev_us) as f64 / 1e6,
        });
        prev_us = rec.timestamp_us;
    }
    Ok(energy_of_trace(&segments, power).total_j())
}

/// `{:.6}` for physical quantities in CSV cells.
pub fn csv_f(v: f64) -> String {
    format!("{v:.6}")
}
