//! Strategy comparison over simulated training runs.
//!
//! Every checkpoint of a trajectory is evaluated with every configured
//! strategy and budget, the per-checkpoint scores form a training curve,
//! and the curve is summarized by total variation, monotonicity and,
//! when a second bank is configured, rank distance to full-bank accuracy
//! on that bank.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::real;
use crate::irt::{Ability, ItemParams};
use crate::metrics::{self, RankTable, TrainingCurve};
use crate::par::{self, Execution};
use crate::seed;
use crate::session::{run_session, ResponseOracle, SessionConfig, Strategy};
use crate::simulation::{self, simulated_oracle, SyntheticBankSpec, TrajectorySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankSource {
    File { path: PathBuf },
    Synthetic(SyntheticBankSpec),
}

impl BankSource {
    pub fn load(&self) -> Result<Vec<ItemParams>> {
        match self {
            BankSource::File { path } => crate::io::read_item_bank(path),
            BankSource::Synthetic(spec) => simulation::generate_bank(spec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    Simulated(TrajectorySpec),
    /// True abilities at each checkpoint, e.g. from a recorded run.
    Recorded { abilities: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub bank: BankSource,
    /// Second benchmark targeting the same ability, used for rank distance.
    #[serde(default)]
    pub validation_bank: Option<BankSource>,
    pub trajectory: TrajectorySource,
    pub strategies: Vec<Strategy>,
    pub budgets: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Enables an extra dynamic-stopping pass with this SE threshold.
    #[serde(default)]
    pub se_threshold: Option<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub execution: Execution,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() || self.budgets.is_empty() {
            return Err(Error::InvalidConfig("at least one strategy and one budget are required".into()));
        }
        if self.budgets.contains(&0) {
            return Err(Error::InvalidConfig("budgets must be positive".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be positive".into()));
        }
        if let Some(t) = self.se_threshold {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidConfig(format!("SE threshold must be positive, got {t}")));
            }
        }
        Ok(())
    }

    pub fn replication_seed(&self, replication: usize) -> u64 {
        seed::derive(self.seed, replication as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub strategy: Strategy,
    pub budget: usize,
    pub replication: usize,
    pub seed: u64,
    pub total_variation: Option<f64>,
    pub monotonicity: Option<f64>,
    pub rank_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub strategy: Strategy,
    pub budget: usize,
    pub replication: usize,
    pub checkpoint: usize,
    pub true_theta: f64,
    pub score: f64,
    pub items: usize,
    pub mean_difficulty: f64,
    pub first_item: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingPoint {
    pub replication: usize,
    pub checkpoint: usize,
    pub true_theta: f64,
    pub items: usize,
    pub final_se: f64,
    pub stop_reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub strategy: Strategy,
    pub budget: usize,
    pub cells: usize,
    pub mean_total_variation: Option<f64>,
    pub mean_monotonicity: Option<f64>,
    pub mean_rank_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub bank: Vec<ItemParams>,
    pub trajectories: Vec<Vec<Ability>>,
    pub cells: Vec<CellResult>,
    pub curves: Vec<CurvePoint>,
    pub stopping: Vec<StoppingPoint>,
}

impl ExperimentResults {
    /// Unweighted means per `(strategy, budget)` over the cells whose metric
    /// is defined, in first-appearance order.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut keys: Vec<(Strategy, usize)> = Vec::new();
        for cell in &self.cells {
            if !keys.contains(&(cell.strategy, cell.budget)) {
                keys.push((cell.strategy, cell.budget));
            }
        }
        keys.into_iter()
            .map(|(strategy, budget)| {
                let cells: Vec<&CellResult> = self
                    .cells
                    .iter()
                    .filter(|c| c.strategy == strategy && c.budget == budget)
                    .collect();
                Aggregate {
                    strategy,
                    budget,
                    cells: cells.len(),
                    mean_total_variation: metrics::mean_present(cells.iter().map(|c| c.total_variation)),
                    mean_monotonicity: metrics::mean_present(cells.iter().map(|c| c.monotonicity)),
                    mean_rank_distance: metrics::mean_present(cells.iter().map(|c| c.rank_distance)),
                }
            })
            .collect()
    }

    pub fn cell(&self, strategy: Strategy, budget: usize, replication: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.strategy == strategy && c.budget == budget && c.replication == replication)
    }
}

struct Cell {
    strategy: Strategy,
    budget: usize,
    replication: usize,
}

/// Per-checkpoint oracle seed, shared by every strategy in a replication so
/// that strategies see the same answers on the items they share.
fn checkpoint_seed(replication_seed: u64, checkpoint: usize) -> u64 {
    seed::derive(replication_seed, checkpoint as u64)
}

/// The random subset used by `Random` and `RandomIrt` is fixed for a whole
/// replication, like a static benchmark subset.
fn subset_seed(replication_seed: u64) -> u64 {
    seed::derive_label(replication_seed, "subset")
}

pub fn trajectory_for(config: &ExperimentConfig, replication: usize) -> Result<Vec<Ability>> {
    match &config.trajectory {
        TrajectorySource::Recorded { abilities } => {
            if abilities.len() < 2 {
                return Err(Error::InvalidConfig("a recorded trajectory needs at least 2 checkpoints".into()));
            }
            Ok(abilities.iter().copied().map(Ability).collect())
        }
        TrajectorySource::Simulated(spec) => {
            let spec = TrajectorySpec {
                seed: seed::derive_label(config.replication_seed(replication), "trajectory"),
                ..spec.clone()
            };
            simulation::generate_trajectory(&spec)
        }
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let bank = config.bank.load()?;
    let validation_bank = config.validation_bank.as_ref().map(BankSource::load).transpose()?;
    let trajectories: Vec<Vec<Ability>> = (0..config.replications)
        .map(|r| trajectory_for(config, r))
        .collect::<Result<_>>()?;

    // Reference ranking per replication: full-bank accuracy on the second bank.
    let references: Vec<Option<RankTable>> = par::map_indexed(config.execution, config.replications, |r| {
        let vb = validation_bank.as_ref()?;
        let rseed = seed::derive_label(config.replication_seed(r), "validation");
        let entries = trajectories[r]
            .iter()
            .enumerate()
            .map(|(t, &theta)| {
                let oracle = simulated_oracle(theta, vb, checkpoint_seed(rseed, t));
                let correct = vb.iter().filter(|q| oracle.answer(&q.item_id) == Some(true)).count();
                (format!("{t}"), correct as f64 / vb.len() as f64)
            })
            .collect();
        RankTable::new(entries).ok()
    });

    let mut cells = Vec::new();
    for &strategy in &config.strategies {
        for &budget in &config.budgets {
            for replication in 0..config.replications {
                cells.push(Cell {
                    strategy,
                    budget,
                    replication,
                });
            }
        }
    }

    let outcomes = par::map_slice(config.execution, &cells, |cell| {
        run_cell(config, &bank, &trajectories[cell.replication], references[cell.replication].as_ref(), cell)
    });
    let mut results = Vec::with_capacity(cells.len());
    let mut curves = Vec::new();
    for outcome in outcomes {
        let (cell, points) = outcome?;
        results.push(cell);
        curves.extend(points);
    }

    let stopping = match config.se_threshold {
        Some(threshold) => {
            let per_rep = par::map_indexed(config.execution, config.replications, |r| {
                stopping_pass(config, &bank, &trajectories[r], r, threshold)
            });
            per_rep.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect()
        }
        None => Vec::new(),
    };

    Ok(ExperimentResults {
        bank,
        trajectories,
        cells: results,
        curves,
        stopping,
    })
}

fn run_cell(
    config: &ExperimentConfig,
    bank: &[ItemParams],
    trajectory: &[Ability],
    reference: Option<&RankTable>,
    cell: &Cell,
) -> Result<(CellResult, Vec<CurvePoint>)> {
    let rseed = config.replication_seed(cell.replication);
    let session_config = SessionConfig::new(cell.strategy, Some(cell.budget), None, subset_seed(rseed));
    let mut points = Vec::with_capacity(trajectory.len());
    for (t, &theta) in trajectory.iter().enumerate() {
        let oracle = simulated_oracle(theta, bank, checkpoint_seed(rseed, t));
        let session = run_session(bank, &oracle, &session_config)?;
        points.push(CurvePoint {
            strategy: cell.strategy,
            budget: cell.budget,
            replication: cell.replication,
            checkpoint: t,
            true_theta: theta.0,
            score: session.final_score,
            items: session.len(),
            mean_difficulty: session.mean_difficulty(),
            first_item: session.administered[0].item.item_id.clone(),
        });
    }

    let scores: Vec<f64> = points.iter().map(|p| p.score).collect();
    let curve = TrainingCurve::from_scores(&scores);
    let rank_distance = reference.and_then(|reference| {
        let predicted = RankTable::new(scores.iter().enumerate().map(|(t, &s)| (format!("{t}"), s)).collect()).ok()?;
        metrics::rank_distance(&predicted, reference).ok()
    });
    Ok((
        CellResult {
            strategy: cell.strategy,
            budget: cell.budget,
            replication: cell.replication,
            seed: rseed,
            total_variation: metrics::total_variation(&curve).ok(),
            monotonicity: metrics::monotonicity(&curve).ok(),
            rank_distance,
        },
        points,
    ))
}

fn stopping_pass(
    config: &ExperimentConfig,
    bank: &[ItemParams],
    trajectory: &[Ability],
    replication: usize,
    threshold: f64,
) -> Result<Vec<StoppingPoint>> {
    let rseed = config.replication_seed(replication);
    let session_config = SessionConfig::new(Strategy::Fluid, None, Some(threshold), subset_seed(rseed));
    trajectory
        .iter()
        .enumerate()
        .map(|(t, &theta)| {
            let oracle = simulated_oracle(theta, bank, checkpoint_seed(rseed, t));
            let session = run_session(bank, &oracle, &session_config)?;
            Ok(StoppingPoint {
                replication,
                checkpoint: t,
                true_theta: theta.0,
                items: session.len(),
                final_se: session.final_estimate().map_or(f64::INFINITY, |e| e.standard_error),
                stop_reason: session.stop_reason.to_string(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

pub const RESULTS_COLUMNS: [&str; 7] = [
    "strategy",
    "budget",
    "replication",
    "seed",
    "total_variation",
    "monotonicity",
    "rank_distance",
];

pub const AGGREGATE_COLUMNS: [&str; 6] = [
    "strategy",
    "budget",
    "cells",
    "mean_total_variation",
    "mean_monotonicity",
    "mean_rank_distance",
];

pub const CURVE_COLUMNS: [&str; 9] = [
    "strategy",
    "budget",
    "replication",
    "checkpoint",
    "true_theta",
    "score",
    "items",
    "mean_difficulty",
    "first_item",
];

pub const STOPPING_COLUMNS: [&str; 6] = ["replication", "checkpoint", "true_theta", "items", "final_se", "stop_reason"];

fn opt(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

fn table<const N: usize>(columns: [&str; N], rows: impl IntoIterator<Item = [String; N]>) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(columns)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn results_table(cells: &[CellResult]) -> Result<String> {
    table(
        RESULTS_COLUMNS,
        cells.iter().map(|c| {
            [
                c.strategy.to_string(),
                c.budget.to_string(),
                c.replication.to_string(),
                c.seed.to_string(),
                opt(c.total_variation),
                opt(c.monotonicity),
                opt(c.rank_distance),
            ]
        }),
    )
}

pub fn aggregate_table(aggregates: &[Aggregate]) -> Result<String> {
    table(
        AGGREGATE_COLUMNS,
        aggregates.iter().map(|a| {
            [
                a.strategy.to_string(),
                a.budget.to_string(),
                a.cells.to_string(),
                opt(a.mean_total_variation),
                opt(a.mean_monotonicity),
                opt(a.mean_rank_distance),
            ]
        }),
    )
}

pub fn curves_table(points: &[CurvePoint]) -> Result<String> {
    table(
        CURVE_COLUMNS,
        points.iter().map(|p| {
            [
                p.strategy.to_string(),
                p.budget.to_string(),
                p.replication.to_string(),
                p.checkpoint.to_string(),
                real(p.true_theta),
                real(p.score),
                p.items.to_string(),
                real(p.mean_difficulty),
                p.first_item.clone(),
            ]
        }),
    )
}

pub fn stopping_table(points: &[StoppingPoint]) -> Result<String> {
    table(
        STOPPING_COLUMNS,
        points.iter().map(|p| {
            [
                p.replication.to_string(),
                p.checkpoint.to_string(),
                real(p.true_theta),
                p.items.to_string(),
                real(p.final_se),
                p.stop_reason.clone(),
            ]
        }),
    )
}

/// A parsed delimiter-separated table addressed by column name.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let columns = reader.headers()?.iter().map(str::to_string).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { columns, rows })
    }

    /// Columns from `required` that the table lacks.
    pub fn missing_columns(&self, required: &[&str]) -> Vec<String> {
        required
            .iter()
            .filter(|c| !self.columns.iter().any(|x| x == *c))
            .map(|c| c.to_string())
            .collect()
    }

    pub fn index(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == column)
    }

    pub fn column(&self, column: &str) -> Vec<&str> {
        match self.index(column) {
            Some(i) => self.rows.iter().map(|r| r[i].as_str()).collect(),
            None => Vec::new(),
        }
    }

    pub fn numbers(&self, column: &str) -> Vec<Option<f64>> {
        self.column(column).into_iter().map(|s| s.parse().ok()).collect()
    }
}
