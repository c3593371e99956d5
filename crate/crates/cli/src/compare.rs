use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fluid_core::experiment::{
    aggregate_table, curves_table, results_table, run_experiment, stopping_table, BankSource, ExperimentConfig,
};
use fluid_core::io::{self, real};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Experiment configuration (TOML). Relative paths inside it are
    /// resolved against the file's directory.
    config: PathBuf,
    /// Overrides `output_dir` from the configuration.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

pub const RESULTS: &str = "results.csv";
pub const AGGREGATE: &str = "aggregate.csv";
pub const CURVES: &str = "curves.csv";
pub const STOPPING: &str = "stopping.csv";
pub const BANK: &str = "bank.jsonl";
pub const TRAJECTORIES: &str = "trajectories.csv";

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

pub fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config: ExperimentConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for source in std::iter::once(&mut config.bank).chain(config.validation_bank.as_mut()) {
        if let BankSource::File { path } = source {
            resolve(base, path);
        }
    }
    resolve(base, &mut config.output_dir);
    Ok(config)
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn run(args: Args, seed: Option<u64>) -> anyhow::Result<()> {
    let mut config = load(&args.config)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(dir) = args.out_dir {
        config.output_dir = dir;
    }
    config.validate()?;

    let results = run_experiment(&config)?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let aggregates = results.aggregates();
    write(dir, RESULTS, &results_table(&results.cells)?)?;
    write(dir, AGGREGATE, &aggregate_table(&aggregates)?)?;
    write(dir, CURVES, &curves_table(&results.curves)?)?;
    if config.se_threshold.is_some() {
        write(dir, STOPPING, &stopping_table(&results.stopping)?)?;
    }
    io::write_item_bank(&results.bank, dir.join(BANK))?;
    let mut trajectories = String::from("replication,checkpoint,theta\n");
    for (r, trajectory) in results.trajectories.iter().enumerate() {
        for (t, theta) in trajectory.iter().enumerate() {
            trajectories.push_str(&format!("{r},{t},{}\n", real(theta.0)));
        }
    }
    write(dir, TRAJECTORIES, &trajectories)?;

    let show = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    println!("{:<12} {:>7} {:>6} {:>10} {:>13} {:>14}", "strategy", "budget", "cells", "mean TV", "monotonicity", "rank distance");
    for a in &aggregates {
        println!(
            "{:<12} {:>7} {:>6} {:>10} {:>13} {:>14}",
            a.strategy.name(),
            a.budget,
            a.cells,
            show(a.mean_total_variation),
            show(a.mean_monotonicity),
            show(a.mean_rank_distance)
        );
    }
    println!("results written to {}", dir.display());
    Ok(())
}
