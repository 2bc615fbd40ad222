use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use v2x_core::harness::{
    load_team, run_evaluation, run_training, save_csv, Allocator, ExperimentConfig, MetricsRecord,
    TrainingRun,
};
use v2x_core::selftest;

/// Platoon spectrum-sharing simulator: train per-platoon DDQN agents and
/// compare them with exhaustive-search and random allocation.
#[derive(Debug, Parser)]
#[command(name = "v2x-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment file; omitted settings take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for checkpoints, logs and result tables.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Evaluate only this allocator.
    #[arg(long, global = true)]
    allocator: Option<Allocator>,

    /// Payload per V2V link in bytes (training payload for `train`, the only
    /// test payload otherwise).
    #[arg(long = "payload-bytes", global = true)]
    payload_bytes: Option<u64>,

    /// Number of V2N links, which is also the number of sub-bands.
    #[arg(long, global = true)]
    m: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the agents and write checkpoints plus a JSON-lines log.
    Train,
    /// Evaluate allocators, loading trained agents from the output directory.
    Eval,
    /// Train, then evaluate every allocator over the payload sweep.
    Sweep,
    /// Evaluate the exhaustive and random allocators only.
    Baseline,
    /// Run the invariant suite.
    Selftest,
}

impl Cli {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(m) = self.m {
            config.env.v2n_links = m;
        }
        if let Some(bytes) = self.payload_bytes {
            match self.command {
                Command::Train => config.train_payload_bytes = bytes,
                _ => config.payload_sweep_bytes = vec![bytes],
            }
        }
        if let Some(allocator) = self.allocator {
            config.allocators = vec![allocator];
        }
        config.validate().context("invalid configuration")?;
        Ok(config)
    }
}

fn train(config: &ExperimentConfig) -> Result<TrainingRun> {
    let total = config.train.episodes;
    let every = (total / 20).max(1);
    let started = Instant::now();
    eprintln!(
        "training {} agents for {total} episodes (M = {}, seed {})",
        config.env.platoons, config.env.v2n_links, config.seed
    );
    let run = run_training(config, |s| {
        if (s.episode + 1) % every == 0 || s.episode + 1 == total {
            let losses: Vec<f64> = s.losses.iter().flatten().copied().collect();
            let loss = if losses.is_empty() {
                "-".to_string()
            } else {
                format!("{:.3}", losses.iter().sum::<f64>() / losses.len() as f64)
            };
            eprintln!(
                "  episode {:>5}/{total}  eps {:.3}  reward {:>8.2}  delivered {:.2}  loss {loss}",
                s.episode + 1,
                s.epsilon,
                s.total_reward,
                s.delivery,
            );
        }
    })?;
    let dir = &config.output_dir;
    run.save(config, dir)
        .with_context(|| format!("writing checkpoints to {}", dir.display()))?;
    config.save(&dir.join("config.toml"))?;
    eprintln!(
        "trained in {:.1} s; checkpoints in {}",
        started.elapsed().as_secs_f64(),
        dir.display()
    );
    Ok(run)
}

fn evaluate(
    config: &ExperimentConfig,
    team: Option<&v2x_core::MultiAgent>,
    file: &str,
) -> Result<()> {
    let started = Instant::now();
    eprintln!(
        "evaluating {} allocator(s) at {} payload(s), {} episodes each",
        config.allocators.len(),
        config.payload_sweep_bytes.len(),
        config.test_episodes
    );
    let records = run_evaluation(config, team, &report)?;
    write_results(&config.output_dir, file, &records)?;
    eprintln!("evaluated in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn report(r: &MetricsRecord) {
    eprintln!(
        "  B = {:>6} bytes  {:<10}  V2N {:>7.3} Mbps  delivery {:.3}",
        r.payload_bytes,
        r.allocator,
        r.avg_v2n_rate / 1e6,
        r.delivery_probability
    );
}

fn write_results(dir: &Path, file: &str, records: &[MetricsRecord]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(file);
    save_csv(&path, records)?;
    eprintln!("wrote {} rows to {}", records.len(), path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    if let Command::Selftest = cli.command {
        let seed = cli.seed.unwrap_or(0);
        let report = selftest::run(seed);
        for check in &report.checks {
            let mark = if check.passed { "PASS" } else { "FAIL" };
            println!("{mark} {:<28} {}", check.name, check.detail);
        }
        return Ok(report.all_passed());
    }

    let mut config = cli.experiment()?;
    match cli.command {
        Command::Train => {
            train(&config)?;
        }
        Command::Eval => {
            let team = if config.allocators.contains(&Allocator::Rl) {
                Some(load_team(&config, &config.output_dir)?)
            } else {
                None
            };
            evaluate(&config, team.as_ref(), "eval.csv")?;
        }
        Command::Sweep => {
            let run = if config.allocators.contains(&Allocator::Rl) {
                Some(train(&config)?)
            } else {
                None
            };
            evaluate(&config, run.as_ref().map(|r| &r.team), "sweep.csv")?;
        }
        Command::Baseline => {
            if cli.allocator == Some(Allocator::Rl) {
                bail!("baseline evaluates the exhaustive and random allocators; use eval for rl");
            }
            if cli.allocator.is_none() {
                config.allocators = vec![Allocator::Exhaustive, Allocator::Random];
            }
            evaluate(&config, None, "baseline.csv")?;
        }
        Command::Selftest => unreachable!(),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("selftest failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
