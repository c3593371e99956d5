use fluid_core::calibration::{fit_2pl, CalibrationConfig, ResponseMatrix};
use fluid_core::metrics::spearman;
use fluid_core::simulation::{generate_bank, sample_abilities, simulate_matrix, SyntheticBankSpec};
use fluid_core::{Ability, Execution, ItemParams};

fn quick(seed: u64) -> CalibrationConfig {
    CalibrationConfig {
        chain_count: 2,
        iterations_per_chain: 1_200,
        burn_in: 600,
        thinning: 3,
        seed,
        ..CalibrationConfig::default()
    }
}

fn synthetic(models: usize, items: usize, seed: u64) -> (Vec<ItemParams>, Vec<Ability>, ResponseMatrix) {
    let bank = generate_bank(&SyntheticBankSpec {
        item_count: items,
        seed,
        ..SyntheticBankSpec::default()
    })
    .unwrap();
    let abilities = sample_abilities(models, seed + 1);
    let matrix = simulate_matrix(&abilities, &bank, seed + 2);
    (bank, abilities, matrix)
}

fn with_cells(matrix: &ResponseMatrix, f: impl Fn(usize, usize, Option<bool>) -> Option<bool>) -> ResponseMatrix {
    let rows = (0..matrix.n_models())
        .map(|i| (0..matrix.n_items()).map(|j| f(i, j, matrix.get(i, j))).collect())
        .collect();
    ResponseMatrix::from_rows(matrix.model_ids().to_vec(), matrix.item_ids().to_vec(), rows).unwrap()
}

#[test]
fn difficulty_ranks_are_recovered() {
    let (truth, _, matrix) = synthetic(100, 80, 11);
    let fitted = fit_2pl(&matrix, &quick(1)).unwrap();
    let b_true: Vec<f64> = truth.iter().map(|q| q.difficulty).collect();
    let b_hat: Vec<f64> = fitted.items.iter().map(|q| q.difficulty).collect();
    assert!(spearman(&b_true, &b_hat) >= 0.9);
}

#[test]
fn unsolved_item_sits_above_every_train_ability() {
    let (_, _, matrix) = synthetic(60, 40, 21);
    let matrix = with_cells(&matrix, |_, j, cell| if j == 0 { Some(false) } else { cell });
    let fitted = fit_2pl(&matrix, &quick(2)).unwrap();
    let top = fitted
        .train_abilities
        .iter()
        .map(|(_, a)| a.0)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(fitted.items[0].difficulty > top, "{} <= {top}", fitted.items[0].difficulty);
}

#[test]
fn output_does_not_depend_on_execution() {
    let (_, _, matrix) = synthetic(30, 20, 31);
    let sequential = fit_2pl(
        &matrix,
        &CalibrationConfig {
            execution: Execution::Sequential,
            ..quick(3)
        },
    )
    .unwrap();
    let parallel = fit_2pl(
        &matrix,
        &CalibrationConfig {
            execution: Execution::Parallel,
            ..quick(3)
        },
    )
    .unwrap();
    assert_eq!(sequential, parallel);
    assert_eq!(sequential, fit_2pl(&matrix, &quick(3)).unwrap());
    assert_ne!(sequential, fit_2pl(&matrix, &quick(4)).unwrap());
}

#[test]
fn sparse_matrix_fits_and_is_standardized() {
    let (_, _, matrix) = synthetic(50, 30, 41);
    let sparse = with_cells(&matrix, |i, j, cell| if (i + 2 * j) % 5 == 0 { None } else { cell });
    let fitted = fit_2pl(&sparse, &quick(5)).unwrap();
    assert_eq!(fitted.items.len(), 30);
    let thetas: Vec<f64> = fitted.train_abilities.iter().map(|(_, a)| a.0).collect();
    let mean = thetas.iter().sum::<f64>() / thetas.len() as f64;
    let var = thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / thetas.len() as f64;
    assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    assert!(fitted.items.iter().all(|q| q.is_valid()));
    assert!(fitted.diagnostics.parameters.iter().all(|p| (0.0..=1.0).contains(&p.acceptance_rate)));
}
