use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fluid_core::experiment::{Table, CURVE_COLUMNS, RESULTS_COLUMNS, STOPPING_COLUMNS};
use fluid_core::irt::{item_information, probability, Ability, ItemParams};
use fluid_core::io;

use crate::compare::{BANK, CURVES, RESULTS, STOPPING, TRAJECTORIES};
use crate::svg::{stack, Chart, Heatmap, Mark};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Output directory of `compare`, or the results table inside it.
    results: PathBuf,
    /// Where to write the plots.
    #[arg(long)]
    out: PathBuf,
    /// Items to draw characteristic curves for (default: easiest, median
    /// and hardest item of the bank).
    #[arg(long, value_delimiter = ',')]
    icc_items: Vec<String>,
    /// Replication whose curves are drawn.
    #[arg(long, default_value_t = 0)]
    replication: usize,
}

const HEATMAP_ROWS: usize = 60;

fn read_table(path: &Path, required: &[&str]) -> anyhow::Result<Table> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table = Table::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    let missing = table.missing_columns(required);
    if !missing.is_empty() {
        return Err(crate::invalid(format!(
            "{} is missing column(s): {}",
            path.display(),
            missing.join(", ")
        )));
    }
    Ok(table)
}

fn number(table: &Table, row: &[String], column: &str) -> f64 {
    table
        .index(column)
        .and_then(|i| row[i].parse().ok())
        .unwrap_or(f64::NAN)
}

fn text<'a>(table: &Table, row: &'a [String], column: &str) -> &'a str {
    table.index(column).map_or("", |i| row[i].as_str())
}

/// Probability of a correct response on a grid of `n` abilities over `[lo, hi]`.
pub fn icc_points(item: &ItemParams, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let theta = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            (theta, probability(theta, item.discrimination, item.difficulty))
        })
        .collect()
}

fn training_curves(curves: &Table, replication: usize) -> Option<String> {
    // strategy -> budget -> points
    let mut grouped: BTreeMap<String, BTreeMap<u64, Vec<(f64, f64)>>> = BTreeMap::new();
    for row in &curves.rows {
        if number(curves, row, "replication") != replication as f64 {
            continue;
        }
        let strategy = text(curves, row, "strategy").to_string();
        let budget = number(curves, row, "budget") as u64;
        grouped
            .entry(strategy)
            .or_default()
            .entry(budget)
            .or_default()
            .push((number(curves, row, "checkpoint"), number(curves, row, "score")));
    }
    if grouped.is_empty() {
        return None;
    }
    let charts: Vec<Chart> = grouped
        .into_iter()
        .map(|(strategy, budgets)| {
            let y_label = if strategy == "RANDOM" { "accuracy" } else { "ability" };
            budgets.into_iter().fold(
                Chart::new(&format!("{strategy} training curve"), "checkpoint", y_label),
                |chart, (budget, points)| chart.series(format!("budget {budget}"), points, Mark::Line),
            )
        })
        .collect();
    Some(stack(&charts))
}

fn difficulty_map(curves: &Table, replication: usize) -> Option<String> {
    let mut by_budget: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &curves.rows {
        if number(curves, row, "replication") != replication as f64 || text(curves, row, "strategy") != "FLUID" {
            continue;
        }
        let t = number(curves, row, "checkpoint");
        let budget = number(curves, row, "budget") as u64;
        by_budget
            .entry(budget)
            .or_default()
            .push((t, number(curves, row, "mean_difficulty")));
    }
    if by_budget.is_empty() {
        return None;
    }
    let first_budget = *by_budget.keys().next().expect("non-empty");
    let truth: Vec<(f64, f64)> = curves
        .rows
        .iter()
        .filter(|row| {
            number(curves, row, "replication") == replication as f64
                && text(curves, row, "strategy") == "FLUID"
                && number(curves, row, "budget") as u64 == first_budget
        })
        .map(|row| (number(curves, row, "checkpoint"), number(curves, row, "true_theta")))
        .collect();
    let chart = by_budget.into_iter().fold(
        Chart::new("Difficulty of selected items", "checkpoint", "difficulty / ability"),
        |chart, (budget, points)| chart.series(format!("budget {budget}"), points, Mark::Dots),
    );
    Some(chart.series("true ability", truth, Mark::Line).to_svg())
}

fn items_to_stop(stopping: &Table) -> String {
    let mut by_rep: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &stopping.rows {
        by_rep
            .entry(number(stopping, row, "replication") as u64)
            .or_default()
            .push((number(stopping, row, "checkpoint"), number(stopping, row, "items")));
    }
    by_rep
        .into_iter()
        .take(8)
        .fold(
            Chart::new("Items needed to reach the SE threshold", "checkpoint", "items administered"),
            |chart, (r, points)| chart.series(format!("replication {r}"), points, Mark::Line),
        )
        .to_svg()
}

fn information_heatmap(bank: &[ItemParams], trajectory: &[f64]) -> String {
    let (lo, hi) = bank
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| (lo.min(q.difficulty), hi.max(q.difficulty)));
    let hi = if hi > lo { hi } else { lo + 1.0 };
    let bin = |b: f64| (((b - lo) / (hi - lo) * HEATMAP_ROWS as f64) as usize).min(HEATMAP_ROWS - 1);
    let mut counts = vec![0usize; HEATMAP_ROWS];
    for q in bank {
        counts[bin(q.difficulty)] += 1;
    }
    let mut cells = vec![vec![0.0; trajectory.len()]; HEATMAP_ROWS];
    for q in bank {
        let r = bin(q.difficulty);
        for (t, &theta) in trajectory.iter().enumerate() {
            cells[r][t] += item_information(Ability(theta), q) / counts[r] as f64;
        }
    }
    Heatmap {
        title: "Mean item information over training",
        x_label: "checkpoint",
        y_label: "item difficulty",
        x: (0.0, trajectory.len() as f64),
        y: (lo, hi),
        cells: &cells,
    }
    .to_svg()
}

fn default_icc_items(bank: &[ItemParams]) -> Vec<ItemParams> {
    let mut sorted: Vec<&ItemParams> = bank.iter().collect();
    sorted.sort_by(|a, b| a.difficulty.total_cmp(&b.difficulty).then(a.item_id.cmp(&b.item_id)));
    let mut picks: Vec<ItemParams> = Vec::new();
    for index in [0, sorted.len() / 2, sorted.len() - 1] {
        if !picks.iter().any(|p| p.item_id == sorted[index].item_id) {
            picks.push(sorted[index].clone());
        }
    }
    picks
}

fn icc(items: &[ItemParams]) -> String {
    let mut chart = items.iter().fold(
        Chart::new("Item characteristic curves", "ability", "P(correct)"),
        |chart, q| {
            chart.series(
                format!("{} (a={:.2}, b={:.2})", q.item_id, q.discrimination, q.difficulty),
                icc_points(q, -6.0, 6.0, 241),
                Mark::Line,
            )
        },
    );
    chart.y_range = Some((0.0, 1.0));
    chart.guides = vec![0.5];
    chart.to_svg()
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let dir = if args.results.is_dir() {
        args.results.clone()
    } else {
        args.results.parent().map(Path::to_path_buf).unwrap_or_default()
    };
    let results_path = if args.results.is_dir() {
        dir.join(RESULTS)
    } else {
        args.results.clone()
    };
    let results = read_table(&results_path, &RESULTS_COLUMNS)?;
    let curves = read_table(&dir.join(CURVES), &CURVE_COLUMNS)?;
    if results.rows.is_empty() {
        return Err(crate::invalid(format!("{} has no rows", results_path.display())));
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, svg: String| -> anyhow::Result<()> {
        let path = args.out.join(name);
        fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(())
    };

    if let Some(svg) = training_curves(&curves, args.replication) {
        emit("training_curves.svg", svg)?;
    }
    if let Some(svg) = difficulty_map(&curves, args.replication) {
        emit("difficulty_map.svg", svg)?;
    }
    let stopping_path = dir.join(STOPPING);
    if stopping_path.exists() {
        emit("items_to_stop.svg", items_to_stop(&read_table(&stopping_path, &STOPPING_COLUMNS)?))?;
    }

    let bank_path = dir.join(BANK);
    if bank_path.exists() {
        let bank = io::read_item_bank(&bank_path)?;
        let trajectories_path = dir.join(TRAJECTORIES);
        if trajectories_path.exists() {
            let table = read_table(&trajectories_path, &["replication", "checkpoint", "theta"])?;
            let trajectory: Vec<f64> = table
                .rows
                .iter()
                .filter(|row| number(&table, row, "replication") == args.replication as f64)
                .map(|row| number(&table, row, "theta"))
                .collect();
            if !trajectory.is_empty() {
                emit("information_heatmap.svg", information_heatmap(&bank, &trajectory))?;
            }
        }
        let items = if args.icc_items.is_empty() {
            default_icc_items(&bank)
        } else {
            args.icc_items
                .iter()
                .map(|id| {
                    bank.iter()
                        .find(|q| &q.item_id == id)
                        .cloned()
                        .ok_or_else(|| crate::invalid(format!("item `{id}` is not in {}", bank_path.display())))
                })
                .collect::<anyhow::Result<_>>()?
        };
        emit("icc.svg", icc(&items))?;
    }

    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}
