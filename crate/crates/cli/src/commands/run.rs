//! `run`: one episode under one governor, with trace and summary artifacts.

use std::fs;
use std::path::PathBuf;

use clap::Args;

use govlab::encoder::{EncoderConfig, StateLayout};
use govlab::sim::{run_episode, StopMode};

use crate::commands::{csv_f, emit_trace, out_dir, write_meta};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::govspec;

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment description (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Simulation seed (jitter and any stochastic governor).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; defaults to the config's `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Governor name, overriding the config's `[governor] name`.
    #[arg(long)]
    pub governor: Option<String>,
    /// Model file for the `rl` governor, overriding the config.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(model) = &args.model {
        if !model.exists() {
            return Err(CliError::Config(format!(
                "model file {} does not exist",
                model.display()
            )));
        }
        cfg.governor.model = Some(model.clone());
    }
    let dir = out_dir(&cfg, args.out.as_deref())?;
    let workload = cfg.workload()?;
    let table = cfg.table();
    let power = cfg.power();
    let mut governor = govspec::build(
        &cfg.governor,
        args.governor.as_deref(),
        &table,
        workload.period_s,
    )?;
    let sim = cfg.sim(StopMode::WholePeriod);

    let episode = run_episode(&workload, governor.as_mut(), &table, &power, &sim, args.seed)?;

    let encoder = EncoderConfig::with_intervals(
        table.clone(),
        cfg.interval_uppers(),
        workload.period_s,
    )?;
    let trace_path = dir.join("run_trace.bin");
    emit_trace(
        &trace_path,
        &episode,
        &workload,
        &encoder,
        StateLayout::Compact,
        &table,
    )?;

    let energy = episode.energy.total_j();
    let completion = episode
        .completion_time_s
        .map(csv_f)
        .unwrap_or_default();
    let low_share = episode.level_seconds[0] / episode.horizon_s;
    let mut csv = String::from(
        "governor,seed,completion_s,deadline_met,energy_j,mean_power_w,low_freq_share,steps\n",
    );
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{}\n",
        governor.name(),
        args.seed,
        completion,
        episode.deadline_met,
        csv_f(energy),
        csv_f(energy / episode.horizon_s),
        csv_f(low_share),
        episode.steps.len()
    ));
    fs::write(dir.join("run_summary.csv"), csv)?;

    write_meta(
        &dir,
        "run",
        &cfg,
        &[args.seed],
        &[("governor", governor.name().to_string())],
    )?;

    let completion_text = episode
        .completion_time_s
        .map(|c| format!("{c:.4} s"))
        .unwrap_or_else(|| "none".into());
    println!(
        "run: {} on {}: completion {completion_text}, deadline_met {}, energy {energy:.4} J \
         -> {}",
        governor.name(),
        workload.name,
        episode.deadline_met,
        dir.display()
    );
    Ok(())
}
