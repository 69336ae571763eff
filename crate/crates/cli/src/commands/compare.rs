//! `compare`: evaluate governors on one workload; tabulate energy and
//! deadline outcomes, normalized to the fixed-top baseline.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;

use govlab::encoder::{EncoderConfig, StateLayout};
use govlab::sim::{run_episode, StopMode};

use crate::commands::{csv_f, emit_trace, energy_from_records, out_dir, write_meta};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::govspec;
use crate::svg;

/// Baseline governor every comparison is normalized against.
const BASELINE: &str = "performance";

/// Reported vs. trace-recomputed energy may differ by the utilization
/// quantization of the record format (thousandths), never more than this.
const CROSS_CHECK_TOL: f64 = 0.01;

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Experiment description (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated governor list; the baseline is always added.
    #[arg(long, default_value = "performance,powersave,ondemand,conservative,schedutil")]
    pub governors: String,
    /// Model file for the `rl` governor, overriding the config.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Evaluate this single seed instead of the config's `[train] seeds`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to the config's `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct GovernorRow {
    name: String,
    mean_energy_j: f64,
    met_rate: f64,
    mean_completion_s: Option<f64>,
    low_freq_share: f64,
    /// Largest relative gap between reported energy and the energy
    /// re-accounted from the emitted trace.
    cross_check: f64,
}

pub fn cmd_compare(args: &CompareArgs) -> Result<()> {
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

    let mut names: Vec<String> = args
        .governors
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if names.is_empty() {
        return Err(CliError::Usage("--governors must name at least one governor".into()));
    }
    for name in &names {
        govspec::validate_name(name)?;
    }
    if !names.iter().any(|n| n == BASELINE) {
        names.push(BASELINE.into());
    }
    names.sort();
    names.dedup();
    // The learned governor needs its model before any episode runs.
    if names.iter().any(|n| n == "rl") && cfg.governor.model.is_none() {
        return Err(CliError::Config(
            "comparison includes \"rl\" but no model file is configured \
             ([governor] model = \"...\" or --model)"
                .into(),
        ));
    }

    let dir = out_dir(&cfg, args.out.as_deref())?;
    let workload = cfg.workload()?;
    let table = cfg.table();
    let power = cfg.power();
    let sim = cfg.sim(StopMode::WholePeriod);
    let encoder = EncoderConfig::with_intervals(
        table.clone(),
        cfg.interval_uppers(),
        workload.period_s,
    )?;
    let seeds = match args.seed {
        Some(s) => vec![s],
        None => cfg.train.seeds.clone(),
    };

    // Governors fan out across threads; each thread runs its seeds in order
    // and the rows are sorted again below, so scheduling cannot change the
    // output.
    let mut rows: Vec<GovernorRow> = names
        .par_iter()
        .map(|name| -> Result<GovernorRow> {
            let mut energies = Vec::new();
            let mut completions = Vec::new();
            let mut met = 0usize;
            let mut low = 0.0;
            let mut cross_check = 0.0f64;
            for &seed in &seeds {
                let mut governor =
                    govspec::build(&cfg.governor, Some(name), &table, workload.period_s)?;
                let episode =
                    run_episode(&workload, governor.as_mut(), &table, &power, &sim, seed)?;
                let trace_path = dir.join(format!("trace_{name}_seed{seed}.bin"));
                let records = emit_trace(
                    &trace_path,
                    &episode,
                    &workload,
                    &encoder,
                    StateLayout::Compact,
                    &table,
                )?;
                let reported = episode.energy.total_j();
                let recomputed = energy_from_records(&records, &table, &power)?;
                let gap = (reported - recomputed).abs() / reported.max(1e-12);
                if gap > CROSS_CHECK_TOL {
                    return Err(CliError::Runtime(format!(
                        "{name} seed {seed}: trace re-accounting gives {recomputed:.4} J \
                         but the simulator reported {reported:.4} J"
                    )));
                }
                cross_check = cross_check.max(gap);
                energies.push(reported);
                if let Some(c) = episode.completion_time_s {
                    completions.push(c);
                }
                if episode.deadline_met {
                    met += 1;
                }
                low += episode.level_seconds[0] / episode.horizon_s;
            }
            let n = seeds.len() as f64;
            Ok(GovernorRow {
                name: name.clone(),
                mean_energy_j: energies.iter().sum::<f64>() / n,
                met_rate: met as f64 / n,
                mean_completion_s: if completions.is_empty() {
                    None
                } else {
                    Some(completions.iter().sum::<f64>() / completions.len() as f64)
                },
                low_freq_share: low / n,
                cross_check,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.name.cmp(&b.name));

    let baseline_energy = rows
        .iter()
        .find(|r| r.name == BASELINE)
        .map(|r| r.mean_energy_j)
        .expect("baseline is always in the list");

    let mut csv = String::from(
        "governor,mean_energy_j,normalized_energy,deadline_met_rate,mean_completion_s,\
         low_freq_share\n",
    );
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.name,
            csv_f(row.mean_energy_j),
            csv_f(row.mean_energy_j / baseline_energy),
            csv_f(row.met_rate),
            row.mean_completion_s.map(csv_f).unwrap_or_default(),
            csv_f(row.low_freq_share)
        ));
    }
    fs::write(dir.join("compare.csv"), csv)?;

    let labels: Vec<String> = rows.iter().map(|r| r.name.clone()).collect();
    let normalized: Vec<f64> = rows
        .iter()
        .map(|r| r.mean_energy_j / baseline_energy)
        .collect();
    let value_labels: Vec<String> = normalized.iter().map(|v| format!("{v:.2}")).collect();
    fs::write(
        dir.join("bars.svg"),
        svg::bar_chart(
            &format!("Energy on {}, normalized to {BASELINE}", workload.name),
            "normalized energy",
            &labels,
            &normalized,
            &value_labels,
        ),
    )?;

    let max_gap = rows.iter().map(|r| r.cross_check).fold(0.0f64, f64::max);
    write_meta(
        &dir,
        "compare",
        &cfg,
        &seeds,
        &[(
            "trace_energy_cross_check",
            format!("max relative gap {max_gap:.2e} (tolerance {CROSS_CHECK_TOL})"),
        )],
    )?;

    println!(
        "compare: {} on {} over {} seed(s):",
        labels.join(", "),
        workload.name,
        seeds.len()
    );
    for row in &rows {
        println!(
            "  {:<14} {:>8.4} J  x{:.3}  met {:>5.1}%  low-freq {:>5.1}%",
            row.name,
            row.mean_energy_j,
            row.mean_energy_j / baseline_energy,
            row.met_rate * 100.0,
            row.low_freq_share * 100.0
        );
    }
    println!("  artifacts -> {}", dir.display());
    Ok(())
}
