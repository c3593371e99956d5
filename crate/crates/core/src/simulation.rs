//! Synthetic item banks, ability trajectories over a training run, and
//! Bernoulli response oracles with known ground truth.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::calibration::ResponseMatrix;
use crate::error::{Error, Result};
use crate::irt::{self, Ability, ItemParams};
use crate::par::{self, Execution};
use crate::seed;
use crate::session::ResponseOracle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticBankSpec {
    pub item_count: usize,
    pub difficulty_mean: f64,
    pub difficulty_sd: f64,
    pub log_discrimination_mean: f64,
    pub log_discrimination_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticBankSpec {
    fn default() -> Self {
        Self {
            item_count: 1_000,
            difficulty_mean: 0.0,
            difficulty_sd: 1.0,
            log_discrimination_mean: 0.0,
            log_discrimination_sd: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticBankSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.item_count >= 1
            && self.difficulty_mean.is_finite()
            && self.log_discrimination_mean.is_finite()
            && self.difficulty_sd.is_finite()
            && self.difficulty_sd >= 0.0
            && self.log_discrimination_sd.is_finite()
            && self.log_discrimination_sd >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid bank spec: {self:?}")))
        }
    }
}

/// Difficulties are normal, discriminations log-normal. Item ids are
/// zero-padded sequence numbers, so lexical and numeric order agree.
pub fn generate_bank(spec: &SyntheticBankSpec) -> Result<Vec<ItemParams>> {
    spec.validate()?;
    let difficulty = Normal::new(spec.difficulty_mean, spec.difficulty_sd).expect("validated");
    let log_a = Normal::new(spec.log_discrimination_mean, spec.log_discrimination_sd).expect("validated");
    let width = (spec.item_count - 1).max(1).to_string().len();
    let mut rng = seed::rng(spec.seed);
    Ok((0..spec.item_count)
        .map(|j| {
            let b = difficulty.sample(&mut rng);
            let a = log_a.sample(&mut rng).exp();
            ItemParams {
                item_id: format!("{j:0width$}"),
                discrimination: a,
                difficulty: b,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TrajectoryShape {
    Linear,
    /// Not part of the linear reference scenario: fast growth in the middle
    /// of training that flattens out towards the end.
    LogisticGrowth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySpec {
    pub checkpoint_count: usize,
    pub start_ability: f64,
    pub end_ability: f64,
    pub shape: TrajectoryShape,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            checkpoint_count: 50,
            start_ability: -7.0,
            end_ability: 7.0,
            shape: TrajectoryShape::Linear,
            noise_sd: 0.0,
            seed: 0,
        }
    }
}

/// Steepness of the logistic ramp over the unit interval of training.
const GROWTH_STEEPNESS: f64 = 10.0;

pub fn generate_trajectory(spec: &TrajectorySpec) -> Result<Vec<Ability>> {
    if spec.checkpoint_count < 2
        || !spec.start_ability.is_finite()
        || !spec.end_ability.is_finite()
        || !(spec.noise_sd.is_finite() && spec.noise_sd >= 0.0)
    {
        return Err(Error::InvalidConfig(format!("invalid trajectory spec: {spec:?}")));
    }
    let n = spec.checkpoint_count;
    let span = spec.end_ability - spec.start_ability;
    let lo = irt::logistic(-GROWTH_STEEPNESS / 2.0);
    let hi = irt::logistic(GROWTH_STEEPNESS / 2.0);
    let noise = Normal::new(0.0, spec.noise_sd).expect("validated");
    let mut rng = seed::rng(spec.seed);

    Ok((0..n)
        .map(|t| {
            let x = t as f64 / (n - 1) as f64;
            let progress = match spec.shape {
                TrajectoryShape::Linear => x,
                TrajectoryShape::LogisticGrowth => {
                    (irt::logistic(GROWTH_STEEPNESS * (x - 0.5)) - lo) / (hi - lo)
                }
            };
            let theta = if t == n - 1 {
                spec.end_ability
            } else {
                spec.start_ability + span * progress
            };
            let jitter = if spec.noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            Ability(theta + jitter)
        })
        .collect())
}

/// Answers items by sampling the 2PL probability at a fixed true ability.
/// Each item's uniform draw is a hash of `(seed, item_id)`, so answers do
/// not depend on query order and two strategies querying the same item see
/// the same outcome.
#[derive(Debug, Clone)]
pub struct SimulatedOracle {
    true_ability: Ability,
    seed: u64,
    items: std::collections::HashMap<String, ItemParams>,
}

pub fn simulated_oracle(true_ability: Ability, bank: &[ItemParams], seed: u64) -> SimulatedOracle {
    SimulatedOracle {
        true_ability,
        seed,
        items: bank.iter().map(|q| (q.item_id.clone(), q.clone())).collect(),
    }
}

impl SimulatedOracle {
    pub fn true_ability(&self) -> Ability {
        self.true_ability
    }

    fn draw(&self, item: &ItemParams) -> bool {
        let u = seed::unit_interval(seed::derive_label(self.seed, &item.item_id));
        u < irt::response_probability(self.true_ability, item)
    }
}

impl ResponseOracle for SimulatedOracle {
    fn answer(&self, item_id: &str) -> Option<bool> {
        self.items.get(item_id).map(|item| self.draw(item))
    }
}

/// Entry `(t, j)` is the Fisher information of item `j` at checkpoint `t`.
pub fn information_surface(bank: &[ItemParams], trajectory: &[Ability]) -> Vec<Vec<f64>> {
    information_surface_with(Execution::default(), bank, trajectory)
}

pub fn information_surface_with(execution: Execution, bank: &[ItemParams], trajectory: &[Ability]) -> Vec<Vec<f64>> {
    par::map_slice(execution, trajectory, |&ability| {
        bank.iter().map(|item| irt::item_information(ability, item)).collect()
    })
}

/// Full response matrix for a population of simulated test-takers.
pub fn simulate_matrix(abilities: &[Ability], bank: &[ItemParams], seed: u64) -> ResponseMatrix {
    let width = abilities.len().saturating_sub(1).max(1).to_string().len();
    let model_ids: Vec<String> = (0..abilities.len()).map(|i| format!("m{i:0width$}")).collect();
    let mut rng = seed::rng(seed);
    let cells = abilities
        .iter()
        .flat_map(|&theta| {
            bank.iter()
                .map(|item| Some(rng.random::<f64>() < irt::response_probability(theta, item)))
                .collect::<Vec<_>>()
        })
        .collect();
    ResponseMatrix::new(model_ids, bank.iter().map(|q| q.item_id.clone()).collect(), cells)
        .expect("dimensions agree by construction")
}

/// Standard-normal abilities for a simulated calibration population.
pub fn sample_abilities(count: usize, seed: u64) -> Vec<Ability> {
    let mut rng = seed::rng(seed);
    (0..count)
        .map(|_| Ability(rng.sample(rand_distr::StandardNormal)))
        .collect()
}
