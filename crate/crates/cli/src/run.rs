use std::path::PathBuf;

use anyhow::Context;
use fluid_core::io;
use fluid_core::session::RecordedOracle;
use fluid_core::simulation::simulated_oracle;
use fluid_core::{run_session, Ability, Response, SessionConfig, Strategy};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Calibrated item bank.
    #[arg(long)]
    bank: PathBuf,
    /// Recorded responses (CSV response matrix); needs --model-id.
    #[arg(long, conflicts_with = "simulate_theta", requires = "model_id")]
    responses: Option<PathBuf>,
    /// Row of the response matrix to answer with.
    #[arg(long)]
    model_id: Option<String>,
    /// Answer with a simulated test-taker of this true ability instead.
    #[arg(long, allow_hyphen_values = true)]
    simulate_theta: Option<f64>,
    /// fluid, random or random-irt.
    #[arg(long, default_value = "fluid")]
    strategy: Strategy,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    se_threshold: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    prior_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    prior_sd: f64,
    /// Where to write the session log.
    #[arg(long)]
    out: PathBuf,
}

fn recorded(path: &PathBuf, model_id: &str) -> anyhow::Result<RecordedOracle> {
    let matrix = io::read_response_matrix(path)?;
    let row = matrix
        .model_ids()
        .iter()
        .position(|m| m == model_id)
        .ok_or_else(|| crate::invalid(format!("model `{model_id}` not found in {}", path.display())))?;
    let responses = matrix
        .item_ids()
        .iter()
        .zip(matrix.row(row))
        .filter_map(|(id, cell)| cell.map(|c| Response::new(id.clone(), c)));
    Ok(RecordedOracle::from_responses(responses))
}

pub fn run(args: Args, seed: Option<u64>) -> anyhow::Result<()> {
    let seed = seed.unwrap_or(0);
    let bank = io::read_item_bank(&args.bank)?;
    let mut config = SessionConfig::new(args.strategy, args.budget, args.se_threshold, seed);
    config.prior_mean = args.prior_mean;
    config.prior_sd = args.prior_sd;

    let session = match (&args.responses, &args.model_id, args.simulate_theta) {
        (Some(path), Some(model), None) => {
            let oracle = recorded(path, model)?;
            // Items the model never answered cannot be administered.
            let answered: Vec<_> = bank.iter().filter(|q| oracle.0.contains_key(&q.item_id)).cloned().collect();
            if answered.len() < bank.len() {
                log::info!("{} bank items have no recorded answer and are skipped", bank.len() - answered.len());
            }
            run_session(&answered, &oracle, &config)?
        }
        (None, _, Some(theta)) => {
            if !theta.is_finite() {
                return Err(crate::invalid("--simulate-theta must be finite"));
            }
            run_session(&bank, &simulated_oracle(Ability(theta), &bank, seed), &config)?
        }
        _ => return Err(crate::invalid("give either --responses with --model-id, or --simulate-theta")),
    };

    io::write_session_log(&session, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!("final score: {}", session.final_score);
    println!("items: {}", session.len());
    if let Some(e) = session.final_estimate() {
        println!("standard error: {}", e.standard_error);
    }
    println!("stop reason: {}", session.stop_reason);
    Ok(())
}
