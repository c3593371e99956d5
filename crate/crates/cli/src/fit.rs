use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fluid_core::calibration::{fit_2pl, validate_matrix, CalibrationConfig, Diagnostics, Severity, RHAT_THRESHOLD};
use fluid_core::io;
use fluid_core::metrics::pearson;
use serde::Serialize;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Response matrix (CSV).
    #[arg(long)]
    matrix: PathBuf,
    /// Calibration settings (TOML); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the calibrated item bank.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the diagnostics summary (default: next to the bank).
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    /// Known item parameters to score the fit against.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Recovery {
    difficulty_correlation: f64,
    discrimination_correlation: f64,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    config: &'a CalibrationConfig,
    converged: bool,
    diagnostics: &'a Diagnostics,
    train_abilities: Vec<(&'a str, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    recovery: Option<Recovery>,
}

pub fn load_config(path: Option<&Path>) -> anyhow::Result<CalibrationConfig> {
    match path {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        }
        None => Ok(CalibrationConfig::default()),
    }
}

pub fn run(args: Args, seed: Option<u64>) -> anyhow::Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let matrix = io::read_response_matrix(&args.matrix)?;
    for finding in validate_matrix(&matrix) {
        if finding.severity == Severity::Warning {
            log::warn!("{finding}");
        }
    }
    let truth = args.truth.as_ref().map(io::read_item_bank).transpose()?;

    let fitted = fit_2pl(&matrix, &config)?;
    let diagnostics_path = args
        .diagnostics
        .unwrap_or_else(|| args.out.with_extension("diagnostics.json"));
    let warnings = &fitted.diagnostics.warnings;
    if !warnings.is_empty() {
        eprintln!(
            "warning: {} parameter(s) have split R-hat above {RHAT_THRESHOLD}; details in {}",
            warnings.len(),
            diagnostics_path.display()
        );
    }
    io::write_item_bank(&fitted.items, &args.out).with_context(|| format!("writing {}", args.out.display()))?;

    let recovery = match truth {
        Some(truth) => {
            if truth.len() != fitted.items.len()
                || truth.iter().zip(&fitted.items).any(|(t, f)| t.item_id != f.item_id)
            {
                return Err(crate::invalid("truth bank items do not match the matrix columns"));
            }
            let column = |v: &[fluid_core::ItemParams], f: fn(&fluid_core::ItemParams) -> f64| {
                v.iter().map(f).collect::<Vec<_>>()
            };
            Some(Recovery {
                difficulty_correlation: pearson(
                    &column(&truth, |q| q.difficulty),
                    &column(&fitted.items, |q| q.difficulty),
                ),
                discrimination_correlation: pearson(
                    &column(&truth, |q| q.discrimination),
                    &column(&fitted.items, |q| q.discrimination),
                ),
            })
        }
        None => None,
    };

    let summary = Summary {
        config: &config,
        converged: fitted.diagnostics.converged(),
        diagnostics: &fitted.diagnostics,
        train_abilities: fitted.train_abilities.iter().map(|(id, a)| (id.as_str(), a.0)).collect(),
        recovery,
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(&diagnostics_path, json).with_context(|| format!("writing {}", diagnostics_path.display()))?;

    println!("items: {}", fitted.items.len());
    println!("models: {}", fitted.train_abilities.len());
    match fitted.diagnostics.max_rhat {
        Some(r) => println!("max R-hat: {r:.4}"),
        None => println!("max R-hat: n/a"),
    }
    if let Some(r) = &summary.recovery {
        println!("difficulty correlation: {:.4}", r.difficulty_correlation);
        println!("discrimination correlation: {:.4}", r.discrimination_correlation);
    }
    Ok(())
}
