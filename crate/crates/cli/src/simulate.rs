use std::path::PathBuf;

use anyhow::Context;
use fluid_core::io;
use fluid_core::seed;
use fluid_core::simulation::{generate_bank, sample_abilities, simulate_matrix, SyntheticBankSpec};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Number of simulated test-takers (matrix rows).
    #[arg(long, default_value_t = 150)]
    models: usize,
    #[arg(long, default_value_t = 500)]
    items: usize,
    #[arg(long, default_value_t = 1.0)]
    difficulty_sd: f64,
    #[arg(long, default_value_t = 0.5)]
    log_discrimination_sd: f64,
    /// Where to write the true item parameters.
    #[arg(long)]
    bank: PathBuf,
    /// Where to write the simulated response matrix.
    #[arg(long)]
    matrix: PathBuf,
}

pub fn run(args: Args, seed: Option<u64>) -> anyhow::Result<()> {
    if args.models < 2 {
        return Err(crate::invalid("--models must be at least 2"));
    }
    let master = seed.unwrap_or(0);
    let spec = SyntheticBankSpec {
        item_count: args.items,
        difficulty_sd: args.difficulty_sd,
        log_discrimination_sd: args.log_discrimination_sd,
        seed: seed::derive_label(master, "bank"),
        ..SyntheticBankSpec::default()
    };
    let bank = generate_bank(&spec)?;
    let abilities = sample_abilities(args.models, seed::derive_label(master, "abilities"));
    let matrix = simulate_matrix(&abilities, &bank, seed::derive_label(master, "responses"));
    io::write_item_bank(&bank, &args.bank).with_context(|| format!("writing {}", args.bank.display()))?;
    io::write_response_matrix(&matrix, &args.matrix).with_context(|| format!("writing {}", args.matrix.display()))?;
    println!("wrote {} items and a {}x{} matrix", bank.len(), matrix.n_models(), matrix.n_items());
    Ok(())
}
