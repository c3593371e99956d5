//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fail. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 1 4`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use fluid_core::ability::{estimate_from_observations, Observation};
use fluid_core::calibration::{fit_2pl, CalibrationConfig};
use fluid_core::experiment::{run_experiment, BankSource, ExperimentConfig, TrajectorySource};
use fluid_core::irt::{item_information, Ability, ItemParams};
use fluid_core::metrics::{pearson, total_variation, TrainingCurve};
use fluid_core::session::{replay, run_session, SessionConfig, StopReason, Strategy};
use fluid_core::simulation::{
    generate_bank, generate_trajectory, sample_abilities, simulate_matrix, simulated_oracle, SyntheticBankSpec,
    TrajectoryShape, TrajectorySpec,
};
use fluid_core::{io, seed, Execution, Method, Prior};
use rand::Rng;

type Outcome = Result<String, String>;

struct Criterion {
    number: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn information_peak() -> Outcome {
    let mut rng = seed::rng(1);
    let mut worst = 0.0f64;
    let mut off_peak_violations = 0;
    for j in 0..1_000 {
        let a = rng.random_range(0.1..4.0);
        let b = rng.random_range(-6.0..6.0);
        let item = ItemParams::new(format!("q{j}"), a, b).map_err(|e| e.to_string())?;
        let peak = item_information(Ability(b), &item);
        worst = worst.max((peak - a * a / 4.0).abs());
        for delta in [1e-6, 1e-3, 0.1, 1.0, 5.0] {
            if item_information(Ability(b + delta), &item) >= peak
                || item_information(Ability(b - delta), &item) >= peak
            {
                off_peak_violations += 1;
            }
        }
    }
    check(
        worst <= 1e-12 && off_peak_violations == 0,
        format!("max |I(b) - a^2/4| = {worst:.2e}, off-peak violations = {off_peak_violations}"),
    )
}

/// 1e-2 scan of [-10, 10], then a 1e-4 scan of the best coarse cell's
/// neighbourhood. Objective written out from the model equation.
fn grid_map(observations: &[Observation], prior: Prior) -> f64 {
    let f = |theta: f64| {
        observations
            .iter()
            .map(|o| {
                let x = o.discrimination * (theta - o.difficulty);
                if o.correct {
                    -(1.0 + (-x).exp()).ln()
                } else {
                    -(1.0 + x.exp()).ln()
                }
            })
            .sum::<f64>()
            - (theta - prior.mean).powi(2) / (2.0 * prior.sd * prior.sd)
    };
    let scan = |lo: f64, step: f64, n: usize| {
        (0..=n)
            .map(|k| lo + step * k as f64)
            .map(|t| (f(t), t))
            .fold((f64::NEG_INFINITY, lo), |best, cur| if cur.0 > best.0 { cur } else { best })
            .1
    };
    let coarse = scan(-10.0, 1e-2, 2_000);
    scan((coarse - 0.02).max(-10.0), 1e-4, 400).min(10.0)
}

fn estimation_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for pattern in 0..200u64 {
        let mut rng = seed::rng(seed::derive(2, pattern));
        let n = rng.random_range(1..=30);
        let theta_true: f64 = rng.random_range(-3.0..3.0);
        let observations: Vec<Observation> = (0..n)
            .map(|_| {
                let a: f64 = rng.random_range(0.3..2.5);
                let b: f64 = rng.random_range(-3.0..3.0);
                let p = 1.0 / (1.0 + (-a * (theta_true - b)).exp());
                Observation {
                    discrimination: a,
                    difficulty: b,
                    correct: rng.random::<f64>() < p,
                }
            })
            .collect();
        let prior = Prior::new(rng.random_range(-1.0..1.0), rng.random_range(0.5..2.0)).map_err(|e| e.to_string())?;
        let newton = estimate_from_observations(&observations, Method::Map, prior)
            .map_err(|e| e.to_string())?
            .theta;
        worst = worst.max((newton - grid_map(&observations, prior)).abs());
    }
    check(worst <= 2e-4, format!("max |newton - grid| = {worst:.2e} over 200 patterns"))
}

fn calibration_recovery() -> Outcome {
    let spec = SyntheticBankSpec {
        item_count: 500,
        difficulty_mean: 0.0,
        difficulty_sd: 1.0,
        log_discrimination_mean: 0.0,
        log_discrimination_sd: 0.5,
        seed: 3,
    };
    let truth = generate_bank(&spec).map_err(|e| e.to_string())?;
    let abilities = sample_abilities(150, 31);
    let matrix = simulate_matrix(&abilities, &truth, 32);
    let config = CalibrationConfig {
        seed: 33,
        ..CalibrationConfig::default()
    };
    let fitted = fit_2pl(&matrix, &config).map_err(|e| e.to_string())?;
    let column = |items: &[ItemParams], f: fn(&ItemParams) -> f64| items.iter().map(f).collect::<Vec<_>>();
    let rb = pearson(&column(&truth, |q| q.difficulty), &column(&fitted.items, |q| q.difficulty));
    let ra = pearson(&column(&truth, |q| q.discrimination), &column(&fitted.items, |q| q.discrimination));
    check(
        rb >= 0.95 && ra >= 0.85,
        format!(
            "corr(b) = {rb:.4}, corr(a) = {ra:.4}, max R-hat = {:.3}",
            fitted.diagnostics.max_rhat.unwrap_or(f64::NAN)
        ),
    )
}

fn tv_exactness() -> Outcome {
    let tv = |s: &[f64]| total_variation(&TrainingCurve::from_scores(s)).map_err(|e| e.to_string());
    let first = tv(&[0.0, 0.5, 1.0])?;
    let second = tv(&[0.0, 1.0, 0.0, 1.0])?;
    let mut rng = seed::rng(4);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..60usize);
        let mut value: f64 = rng.random_range(-5.0..5.0);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let curve: Vec<f64> = (0..n)
            .map(|_| {
                value += sign * rng.random_range(1e-3..1.0);
                value
            })
            .collect();
        let expected = n as f64 / (n - 1) as f64;
        if (tv(&curve)? - expected).abs() > 1e-12 * expected {
            mismatches += 1;
        }
    }
    check(
        first == 1.5 && second == 4.0 && mismatches == 0,
        format!("TV([0,0.5,1]) = {first}, TV([0,1,0,1]) = {second}, monotone mismatches = {mismatches}/100"),
    )
}

fn ablation_direction() -> Outcome {
    let budgets = vec![10, 50, 100];
    let config = ExperimentConfig {
        bank: BankSource::Synthetic(SyntheticBankSpec {
            seed: 5,
            ..SyntheticBankSpec::default()
        }),
        validation_bank: None,
        trajectory: TrajectorySource::Simulated(TrajectorySpec::default()),
        strategies: vec![Strategy::Fluid, Strategy::Random],
        budgets: budgets.clone(),
        replications: 20,
        seed: 5,
        se_threshold: None,
        output_dir: "unused".into(),
        execution: Execution::default(),
    };
    let results = run_experiment(&config).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut details = Vec::new();
    for &budget in &budgets {
        let mut wins = 0;
        for r in 0..config.replications {
            let tv = |s| results.cell(s, budget, r).and_then(|c| c.total_variation);
            if let (Some(f), Some(g)) = (tv(Strategy::Fluid), tv(Strategy::Random)) {
                if f < g {
                    wins += 1;
                }
            }
        }
        let aggregate = |s| {
            results
                .aggregates()
                .into_iter()
                .find(|a| a.strategy == s && a.budget == budget)
                .expect("every cell ran")
        };
        let (fluid, random) = (aggregate(Strategy::Fluid), aggregate(Strategy::Random));
        let mono_f = fluid.mean_monotonicity.unwrap_or(f64::NAN);
        let mono_r = random.mean_monotonicity.unwrap_or(f64::NAN);
        let share = wins as f64 / config.replications as f64;
        ok &= share >= 0.9 && mono_f >= mono_r;
        details.push(format!(
            "budget {budget}: TV wins {wins}/{} (TV {:.3} vs {:.3}), monotonicity {mono_f:.4} vs {mono_r:.4}",
            config.replications,
            fluid.mean_total_variation.unwrap_or(f64::NAN),
            random.mean_total_variation.unwrap_or(f64::NAN),
        ));
    }
    check(ok, details.join("; "))
}

fn adaptivity() -> Outcome {
    let mut increasing = 0;
    for s in 0..100u64 {
        let run_seed = seed::derive(6, s);
        let bank = generate_bank(&SyntheticBankSpec {
            seed: run_seed,
            ..SyntheticBankSpec::default()
        })
        .map_err(|e| e.to_string())?;
        let config = SessionConfig::new(Strategy::Fluid, Some(30), None, run_seed);
        let mut means = Vec::new();
        for (k, theta) in [-2.0, 0.0, 2.0].into_iter().enumerate() {
            let oracle = simulated_oracle(Ability(theta), &bank, seed::derive(run_seed, k as u64));
            means.push(run_session(&bank, &oracle, &config).map_err(|e| e.to_string())?.mean_difficulty());
        }
        if means[0] < means[1] && means[1] < means[2] {
            increasing += 1;
        }
    }
    check(increasing >= 95, format!("strictly increasing in {increasing}/100 seeds"))
}

fn dynamic_stopping() -> Outcome {
    let threshold = 0.3;
    let config = ExperimentConfig {
        bank: BankSource::Synthetic(SyntheticBankSpec {
            seed: 7,
            ..SyntheticBankSpec::default()
        }),
        validation_bank: None,
        trajectory: TrajectorySource::Simulated(TrajectorySpec::default()),
        strategies: vec![Strategy::Fluid],
        budgets: vec![1],
        replications: 1,
        seed: 7,
        se_threshold: Some(threshold),
        output_dir: "unused".into(),
        execution: Execution::default(),
    };
    let results = run_experiment(&config).map_err(|e| e.to_string())?;
    let counts: Vec<usize> = results.stopping.iter().map(|p| p.items).collect();
    let range = counts.iter().max().unwrap_or(&0) - counts.iter().min().unwrap_or(&0);
    let terminated: Vec<_> = results
        .stopping
        .iter()
        .filter(|p| p.stop_reason == StopReason::SeThreshold.to_string())
        .collect();
    let above = terminated.iter().filter(|p| p.final_se >= threshold).count();
    check(
        results.stopping.len() == 50 && range >= 5 && above == 0 && !terminated.is_empty(),
        format!(
            "items {}..{} (range {range}), {} SE-terminated sessions, {above} above threshold {threshold}",
            counts.iter().min().unwrap_or(&0),
            counts.iter().max().unwrap_or(&0),
            terminated.len()
        ),
    )
}

fn session_replay() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bank = generate_bank(&SyntheticBankSpec {
        seed: 8,
        ..SyntheticBankSpec::default()
    })
    .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut steps = 0;
    for k in 0..40u64 {
        let theta = -4.0 + 0.2 * k as f64;
        let se = if k % 2 == 0 { Some(0.35) } else { None };
        let config = SessionConfig::new(Strategy::Fluid, Some(60), se, k);
        let oracle = simulated_oracle(Ability(theta), &bank, seed::derive(8, k));
        let session = run_session(&bank, &oracle, &config).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("session_{k}.jsonl"));
        io::write_session_log(&session, &path).map_err(|e| e.to_string())?;
        let logged = io::read_session_log(&path).map_err(|e| e.to_string())?;
        let replayed = replay(&logged).map_err(|e| e.to_string())?;
        if replayed.len() != logged.trajectory.len() {
            return Err(format!("session {k}: replay length mismatch"));
        }
        for (r, l) in replayed.iter().zip(&logged.trajectory) {
            worst = worst.max((r.theta - l.theta).abs());
            steps += 1;
        }
    }
    check(worst <= 1e-9, format!("max |replayed - logged| = {worst:.2e} over {steps} steps in 40 logs"))
}

fn saturation() -> Outcome {
    let budget = 500;
    let trajectory = TrajectorySpec {
        checkpoint_count: 50,
        start_ability: -2.0,
        end_ability: 6.0,
        shape: TrajectoryShape::LogisticGrowth,
        noise_sd: 0.0,
        seed: 0,
    };
    let thetas = generate_trajectory(&trajectory).map_err(|e| e.to_string())?;
    let tail_start = thetas.len() - (thetas.len() * 3).div_ceil(10);
    let tail: Vec<f64> = thetas[tail_start..].iter().map(|a| a.0).collect();

    let mut wins = 0;
    let mut fluid_mono = Vec::new();
    let mut random_mono = Vec::new();
    let mut final_accuracy = Vec::new();
    for s in 0..20u64 {
        let config = ExperimentConfig {
            bank: BankSource::Synthetic(SyntheticBankSpec {
                item_count: 5_000,
                seed: seed::derive(9, s),
                ..SyntheticBankSpec::default()
            }),
            validation_bank: None,
            trajectory: TrajectorySource::Recorded { abilities: tail.clone() },
            strategies: vec![Strategy::Fluid, Strategy::Random],
            budgets: vec![budget],
            replications: 1,
            seed: seed::derive_label(9, &s.to_string()),
            se_threshold: None,
            output_dir: "unused".into(),
            execution: Execution::default(),
        };
        let results = run_experiment(&config).map_err(|e| e.to_string())?;
        let mono = |strategy| results.cell(strategy, budget, 0).and_then(|c| c.monotonicity);
        let (f, r) = (mono(Strategy::Fluid).unwrap_or(0.0), mono(Strategy::Random).unwrap_or(0.0));
        if f > r {
            wins += 1;
        }
        fluid_mono.push(f);
        random_mono.push(r);
        final_accuracy.extend(
            results
                .curves
                .iter()
                .filter(|p| p.strategy == Strategy::Random && p.checkpoint + 1 == tail.len())
                .map(|p| p.score),
        );
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    check(
        wins >= 18,
        format!(
            "FLUID wins {wins}/20; mean monotonicity {:.3} vs {:.3}; tail theta {:.2}..{:.2}, final RANDOM accuracy {:.3}",
            mean(&fluid_mono),
            mean(&random_mono),
            tail[0],
            tail[tail.len() - 1],
            mean(&final_accuracy)
        ),
    )
}

const CRITERIA: [Criterion; 9] = [
    Criterion {
        number: 1,
        name: "Fisher-information peak",
        limit: Duration::from_secs(1),
        run: information_peak,
    },
    Criterion {
        number: 2,
        name: "ability estimation matches grid oracle",
        limit: Duration::from_secs(10),
        run: estimation_oracle,
    },
    Criterion {
        number: 3,
        name: "calibration parameter recovery",
        limit: Duration::from_secs(15 * 60),
        run: calibration_recovery,
    },
    Criterion {
        number: 4,
        name: "total-variation exactness",
        limit: Duration::from_secs(1),
        run: tv_exactness,
    },
    Criterion {
        number: 5,
        name: "ablation direction",
        limit: Duration::from_secs(5 * 60),
        run: ablation_direction,
    },
    Criterion {
        number: 6,
        name: "adaptivity",
        limit: Duration::from_secs(60),
        run: adaptivity,
    },
    Criterion {
        number: 7,
        name: "dynamic stopping",
        limit: Duration::from_secs(60),
        run: dynamic_stopping,
    },
    Criterion {
        number: 8,
        name: "session replay",
        limit: Duration::from_secs(10),
        run: session_replay,
    },
    Criterion {
        number: 9,
        name: "saturation mitigation",
        limit: Duration::from_secs(5 * 60),
        run: saturation,
    },
];

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for criterion in CRITERIA.iter().filter(|c| selected.is_empty() || selected.contains(&c.number)) {
        let start = Instant::now();
        let outcome = (criterion.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= criterion.limit;
        let (status, detail) = match &outcome {
            Ok(d) if in_time => ("PASS", d.clone()),
            Ok(d) => ("FAIL", format!("{d}; exceeded {:?}", criterion.limit)),
            Err(d) => ("FAIL", d.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {} {status}: {} ({:.2}s) {detail}",
            criterion.number,
            criterion.name,
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
