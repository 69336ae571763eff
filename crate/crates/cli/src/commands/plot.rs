//! `plot`: render a binary trace or a training-curve CSV to SVG.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;

use govlab::trace::load_trace;

use crate::error::{CliError, Result};
use crate::svg::{self, Series};

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Trace file (`.bin`) or curves CSV produced by `train`.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory; defaults to the input's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_plot(args: &PlotArgs) -> Result<()> {
    let input = &args.input;
    let bytes = fs::read(input)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", input.display())))?;

    let svg_text = if bytes.starts_with(b"GTRC") {
        plot_trace(input)?
    } else {
        plot_curves(input, &bytes)?
    };

    let dir = match &args.out {
        Some(d) => {
            fs::create_dir_all(d)
                .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", d.display())))?;
            d.clone()
        }
        None => input.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("plot");
    let out_path = dir.join(format!("{stem}.svg"));
    fs::write(&out_path, svg_text)?;
    println!("plot: {} -> {}", input.display(), out_path.display());
    Ok(())
}

/// Governed run: frequency plus peak and average utilization per sampling
/// point, one polyline each.
fn plot_trace(path: &Path) -> Result<String> {
    let (_, records) = load_trace(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let freq: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.timestamp_us as f64 / 1e6, f64::from(r.freq_khz) / 1e6))
        .collect();
    let util_max: Vec<(f64, f64)> = records
        .iter()
        .map(|r| {
            (
                r.timestamp_us as f64 / 1e6,
                f64::from(r.util_max_millis) / 1000.0,
            )
        })
        .collect();
    let util_avg: Vec<(f64, f64)> = records
        .iter()
        .map(|r| {
            (
                r.timestamp_us as f64 / 1e6,
                f64::from(r.util_avg_millis) / 1000.0,
            )
        })
        .collect();
    Ok(svg::line_chart(
        "Governed run",
        "time (s)",
        "GHz / utilization",
        &[
            Series {
                name: "frequency (GHz)",
                color: "#c03030",
                points: &freq,
            },
            Series {
                name: "util_max",
                color: "#3060c0",
                points: &util_max,
            },
            Series {
                name: "util_avg",
                color: "#30a060",
                points: &util_avg,
            },
        ],
    ))
}

/// Training curves: mean evaluation reward and mean completion time per
/// episode.
fn plot_curves(path: &Path, bytes: &[u8]) -> Result<String> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| CliError::Config(format!("{}: neither a trace nor a CSV", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let columns: Vec<&str> = header.split(',').collect();
    let episode_col = columns.iter().position(|c| *c == "episode");
    let reward_col = columns.iter().position(|c| *c == "mean_reward");
    let completion_col = columns.iter().position(|c| *c == "mean_completion_s");
    let (Some(episode_col), Some(reward_col), Some(completion_col)) =
        (episode_col, reward_col, completion_col)
    else {
        return Err(CliError::Config(format!(
            "{}: expected columns episode, mean_reward, mean_completion_s",
            path.display()
        )));
    };

    let mut reward = Vec::new();
    let mut completion = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |idx: usize| -> Result<f64> {
            fields
                .get(idx)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| {
                    CliError::Config(format!("{}: bad row {}", path.display(), n + 2))
                })
        };
        let episode = parse(episode_col)?;
        reward.push((episode, parse(reward_col)?));
        completion.push((episode, parse(completion_col)?));
    }
    Ok(svg::line_chart(
        "Training curves",
        "episode",
        "reward / seconds",
        &[
            Series {
                name: "mean eval reward",
                color: "#3060c0",
                points: &reward,
            },
            Series {
                name: "mean completion (s)",
                color: "#c03030",
                points: &completion,
            },
        ],
    ))
}
