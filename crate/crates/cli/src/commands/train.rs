//! `train`: learn a policy per seed, emit model, quantized model, and curves.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;

use govlab::quant::{quantize, save_quantized};
use govlab::rl::model;
use govlab::rl::train::{train_governor, TrainOutcome};

use crate::commands::{csv_f, out_dir, write_meta};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Experiment description (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Train this single seed instead of the config's `[train] seeds`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to the config's `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let dir = out_dir(&cfg, args.out.as_deref())?;
    let workload = cfg.workload()?;
    let table = cfg.table();
    let power = cfg.power();
    let train_cfg = cfg.train_config()?;
    let seeds = match args.seed {
        Some(s) => vec![s],
        None => cfg.train.seeds.clone(),
    };

    // Seeds are independent; aggregation below sorts, so thread order is
    // irrelevant.
    let mut outcomes: Vec<(u64, TrainOutcome)> = seeds
        .par_iter()
        .map(|&seed| {
            train_governor(&workload, &table, &power, &train_cfg, seed)
                .map(|outcome| (seed, outcome))
                .map_err(|e| CliError::Runtime(format!("training seed {seed}: {e}")))
        })
        .collect::<Result<_>>()?;
    outcomes.sort_by_key(|(seed, _)| *seed);

    let mut best_notes = Vec::new();
    for (seed, outcome) in &outcomes {
        // The exported policy is the best evaluation checkpoint, not
        // whatever the last episode left behind.
        let model_path = dir.join(format!("model_seed{seed}.json"));
        model::save(&model_path, &outcome.best_net, &outcome.encoder, outcome.layout)?;

        let qnet = quantize(&outcome.best_net, &table, outcome.layout)?;
        save_quantized(&dir.join(format!("model_seed{seed}.qgov")), &qnet)?;

        let mut csv = String::from(
            "episode,mean_reward,std_reward,mean_completion_s,deadline_hits,eval_episodes\n",
        );
        for point in &outcome.curves {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                point.episode,
                csv_f(point.mean_reward),
                csv_f(point.std_reward),
                csv_f(point.mean_completion_s),
                point.deadline_hits,
                point.eval_episodes
            ));
        }
        fs::write(dir.join(format!("curves_seed{seed}.csv")), csv)?;

        let last = outcome.curves.last();
        println!(
            "train: seed {seed}: {} episodes, best checkpoint @ {} \
             (final eval reward {}), model -> {}",
            train_cfg.episodes,
            outcome.best_episode,
            last.map(|p| format!("{:.4}", p.mean_reward))
                .unwrap_or_else(|| "n/a".into()),
            model_path.display()
        );
        best_notes.push(format!("seed {seed} @ episode {}", outcome.best_episode));
    }

    write_meta(
        &dir,
        "train",
        &cfg,
        &seeds,
        &[("exported_checkpoints", best_notes.join("; "))],
    )?;
    Ok(())
}
