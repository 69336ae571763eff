//! `bench`: inference latency of a trained model, integer path vs. float.

use std::fs;
use std::hint::black_box;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use govlab::power::FrequencyTable;
use govlab::quant::{load_quantized, quantize, quantize_state, QuantizedQNet};
use govlab::rl::model;
use govlab::rl::net::{q_forward, QNet};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Trained model: `.json` artifact (benches both paths) or `.qgov`
    /// (integer path only).
    #[arg(long)]
    pub model: PathBuf,
    /// Experiment config supplying the operating-point table for `.json`
    /// models trained on a non-default table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Timed calls per path.
    #[arg(long, default_value_t = 10_000)]
    pub iters: u64,
    /// Seed for the synthetic evaluation states.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for bench.csv; statistics always go to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct Stats {
    mean_ns: f64,
    p50_ns: f64,
    p99_ns: f64,
}

fn stats(mut samples: Vec<f64>) -> Stats {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    Stats {
        mean_ns: samples.iter().sum::<f64>() / n as f64,
        p50_ns: samples[n / 2],
        p99_ns: samples[(n * 99 / 100).min(n - 1)],
    }
}

/// The loaded model, whichever artifact was given.
enum Loaded {
    /// Float network plus its quantization.
    Both(QNet, QuantizedQNet),
    IntOnly(QuantizedQNet),
}

fn load(path: &Path, config: Option<&Path>) -> Result<Loaded> {
    if path.extension().is_some_and(|e| e == "qgov") {
        let qnet = load_quantized(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        return Ok(Loaded::IntOnly(qnet));
    }
    let table = match config {
        Some(cfg_path) => ExperimentConfig::load(cfg_path)?.table(),
        None => FrequencyTable::jetson2(),
    };
    let (net, _, layout) = model::load(path, &table).map_err(|e| {
        CliError::Config(format!(
            "{}: {e}{}",
            path.display(),
            if config.is_none() {
                "; for models trained on a non-default table, pass --config"
            } else {
                ""
            }
        ))
    })?;
    let qnet = quantize(&net, &table, layout)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Loaded::Both(net, qnet))
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    if args.iters == 0 {
        return Err(CliError::Usage("--iters must be at least 1".into()));
    }
    let loaded = load(&args.model, args.config.as_deref())?;
    let (qnet, float_net) = match &loaded {
        Loaded::Both(net, qnet) => (qnet, Some(net)),
        Loaded::IntOnly(qnet) => (qnet, None),
    };

    // Synthetic states matching the model's input width (state + action).
    let state_len = qnet.sizes[0] - 1;
    let n_actions = qnet.action_inputs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let states: Vec<Vec<f64>> = (0..256)
        .map(|_| (0..state_len).map(|_| rng.random_range(0.0..=1.2)).collect())
        .collect();
    let states_q: Vec<Vec<i32>> = states.iter().map(|s| quantize_state(s)).collect();

    let iters = args.iters as usize;
    let warmup = (iters / 10).clamp(16, 1024);
    for i in 0..warmup {
        let s = &states_q[i % states_q.len()];
        black_box(qnet.q_int(black_box(s), i % n_actions).unwrap());
    }
    let mut int_samples = Vec::with_capacity(iters);
    for i in 0..iters {
        let s = &states_q[i % states_q.len()];
        let t = Instant::now();
        black_box(qnet.q_int(black_box(s), i % n_actions).unwrap());
        int_samples.push(t.elapsed().as_nanos() as f64);
    }
    let int = stats(int_samples);

    let float = float_net.map(|net| {
        let actions: Vec<f64> = qnet
            .action_inputs
            .iter()
            .map(|&a| govlab::quant::dequantize_value(a))
            .collect();
        for i in 0..warmup {
            let s = &states[i % states.len()];
            black_box(q_forward(net, black_box(s), actions[i % n_actions]).unwrap());
        }
        let mut samples = Vec::with_capacity(iters);
        for i in 0..iters {
            let s = &states[i % states.len()];
            let t = Instant::now();
            black_box(q_forward(net, black_box(s), actions[i % n_actions]).unwrap());
            samples.push(t.elapsed().as_nanos() as f64);
        }
        stats(samples)
    });

    println!(
        "bench: {} ({} calls per path, layout {})",
        args.model.display(),
        iters,
        qnet.layout.as_str()
    );
    println!(
        "  integer path: mean {:>8.1} ns  p50 {:>8.1} ns  p99 {:>8.1} ns",
        int.mean_ns, int.p50_ns, int.p99_ns
    );
    match &float {
        Some(f) => {
            println!(
                "  float path:   mean {:>8.1} ns  p50 {:>8.1} ns  p99 {:>8.1} ns",
                f.mean_ns, f.p50_ns, f.p99_ns
            );
            if int.mean_ns < f.mean_ns {
                println!(
                    "  integer path is {:.2}x faster on this host",
                    f.mean_ns / int.mean_ns
                );
            } else {
                // Timings are host-dependent; the integer path exists for
                // targets without an FPU, not for desktop speedups.
                println!(
                    "  note: integer path is not faster on this host \
                     ({:.2}x the float mean); results vary with the CPU",
                    int.mean_ns / f.mean_ns
                );
            }
        }
        None => println!("  float path:   n/a (quantized artifact carries no float network)"),
    }

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        let mut csv = String::from(
            "path,iters,mean_ns,p50_ns,p99_ns\n",
        );
        csv.push_str(&format!(
            "integer,{},{:.1},{:.1},{:.1}\n",
            iters, int.mean_ns, int.p50_ns, int.p99_ns
        ));
        if let Some(f) = &float {
            csv.push_str(&format!(
                "float,{},{:.1},{:.1},{:.1}\n",
                iters, f.mean_ns, f.p50_ns, f.p99_ns
            ));
        }
        fs::write(dir.join("bench.csv"), csv)?;
        println!("  bench.csv -> {}", dir.display());
    }
    Ok(())
}
