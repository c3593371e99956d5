//! Evaluation sessions over a calibrated item bank.
//!
//! `Fluid` picks, at every step, the not-yet-administered item with the
//! highest Fisher information at the current MAP ability estimate and
//! re-estimates after each response. `Random` and `RandomIrt` administer a
//! seeded random subset; the former scores by accuracy, the latter by MAP
//! ability. Sessions end at the item budget, when the standard error falls
//! below a threshold, or when the bank runs out.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::ability::{self, AbilityEstimate, Method, Observation, Prior};
use crate::error::{Error, Result};
use crate::irt::{self, Ability, ItemParams, Response};
use crate::metrics;
use crate::seed;

/// Source of answers for the test-taker under evaluation.
pub trait ResponseOracle {
    /// Whether the test-taker answers `item_id` correctly; `None` if the
    /// oracle has no answer for it.
    fn answer(&self, item_id: &str) -> Option<bool>;
}

impl<O: ResponseOracle + ?Sized> ResponseOracle for &O {
    fn answer(&self, item_id: &str) -> Option<bool> {
        (**self).answer(item_id)
    }
}

/// Answers replayed from previously recorded evaluation results.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordedOracle(pub HashMap<String, bool>);

impl RecordedOracle {
    pub fn from_responses(responses: impl IntoIterator<Item = Response>) -> Self {
        Self(responses.into_iter().map(|r| (r.item_id, r.correct)).collect())
    }
}

impl ResponseOracle for RecordedOracle {
    fn answer(&self, item_id: &str) -> Option<bool> {
        self.0.get(item_id).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    Fluid,
    Random,
    RandomIrt,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Fluid, Strategy::Random, Strategy::RandomIrt];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Fluid => "FLUID",
            Strategy::Random => "RANDOM",
            Strategy::RandomIrt => "RANDOM_IRT",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "fluid" => Ok(Strategy::Fluid),
            "random" => Ok(Strategy::Random),
            "random_irt" => Ok(Strategy::RandomIrt),
            _ => Err(Error::InvalidConfig(format!(
                "unknown strategy `{s}` (expected fluid, random or random-irt)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    Budget,
    SeThreshold,
    BankExhausted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Budget => "BUDGET",
            StopReason::SeThreshold => "SE_THRESHOLD",
            StopReason::BankExhausted => "BANK_EXHAUSTED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub strategy: Strategy,
    /// Maximum number of items; `None` means the whole bank.
    pub budget: Option<usize>,
    /// Stop once the MAP standard error drops below this value.
    pub se_threshold: Option<f64>,
    pub seed: u64,
    pub prior_mean: f64,
    pub prior_sd: f64,
}

impl SessionConfig {
    pub fn new(strategy: Strategy, budget: Option<usize>, se_threshold: Option<f64>, seed: u64) -> Self {
        let prior = Prior::default();
        Self {
            strategy,
            budget,
            se_threshold,
            seed,
            prior_mean: prior.mean,
            prior_sd: prior.sd,
        }
    }

    pub fn prior(&self) -> Prior {
        Prior {
            mean: self.prior_mean,
            sd: self.prior_sd,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget.is_none() && self.se_threshold.is_none() {
            return Err(Error::InvalidConfig(
                "a session needs a budget, an SE threshold, or both".into(),
            ));
        }
        if self.budget == Some(0) {
            return Err(Error::InvalidConfig("budget must be positive".into()));
        }
        if let Some(t) = self.se_threshold {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidConfig(format!("SE threshold must be positive, got {t}")));
            }
        }
        self.prior().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Administered {
    pub item: ItemParams,
    pub correct: bool,
}

impl Administered {
    pub fn response(&self) -> Response {
        Response::new(self.item.item_id.clone(), self.correct)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSession {
    pub config: SessionConfig,
    /// Items in the order they were administered; ids are distinct.
    pub administered: Vec<Administered>,
    /// MAP estimate after each administered item.
    pub trajectory: Vec<AbilityEstimate>,
    /// Accuracy for `Random`, MAP ability otherwise.
    pub final_score: f64,
    pub stop_reason: StopReason,
}

impl EvalSession {
    pub fn len(&self) -> usize {
        self.administered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.administered.is_empty()
    }

    pub fn final_estimate(&self) -> Option<&AbilityEstimate> {
        self.trajectory.last()
    }

    pub fn responses(&self) -> Vec<Response> {
        self.administered.iter().map(Administered::response).collect()
    }

    pub fn mean_difficulty(&self) -> f64 {
        self.administered.iter().map(|a| a.item.difficulty).sum::<f64>() / self.len() as f64
    }
}

/// Highest information wins; among exact ties the lexically smallest id.
fn better(candidate: (f64, &str), best: (f64, &str)) -> bool {
    candidate.0 > best.0 || (candidate.0 == best.0 && candidate.1 < best.1)
}

pub fn select_next_item<'a>(
    bank: &'a [ItemParams],
    already_administered: &HashSet<String>,
    current_ability: Ability,
) -> Result<&'a ItemParams> {
    let mut best: Option<(f64, &ItemParams)> = None;
    for item in bank.iter().filter(|q| !already_administered.contains(&q.item_id)) {
        let info = irt::item_information(current_ability, item);
        if best.is_none_or(|(b, q)| better((info, &item.item_id), (b, &q.item_id))) {
            best = Some((info, item));
        }
    }
    best.map(|(_, q)| q).ok_or(Error::BankExhausted)
}

/// The item every `Fluid` session starts with: the most informative item at
/// the prior mean.
pub fn first_item(bank: &[ItemParams], prior_mean: f64) -> Result<&ItemParams> {
    select_next_item(bank, &HashSet::new(), Ability(prior_mean))
}

fn usable_bank(bank: &[ItemParams]) -> Result<Vec<&ItemParams>> {
    let mut seen = HashSet::new();
    let mut usable = Vec::with_capacity(bank.len());
    for item in bank {
        if let Err(e) = item.validate() {
            log::warn!("excluding item from session: {e}");
            continue;
        }
        if !seen.insert(item.item_id.as_str()) {
            return Err(Error::InvalidConfig(format!("duplicate item id `{}` in bank", item.item_id)));
        }
        usable.push(item);
    }
    if usable.is_empty() {
        return Err(Error::InvalidConfig("item bank has no usable items".into()));
    }
    Ok(usable)
}

pub fn run_session(bank: &[ItemParams], oracle: &impl ResponseOracle, config: &SessionConfig) -> Result<EvalSession> {
    config.validate()?;
    let items = usable_bank(bank)?;
    let prior = config.prior();
    let budget = config.budget.unwrap_or(usize::MAX);

    let mut order: Vec<usize> = (0..items.len()).collect();
    if config.strategy != Strategy::Fluid {
        order.shuffle(&mut seed::rng(config.seed));
    }
    let mut used = vec![false; items.len()];

    let mut administered = Vec::new();
    let mut observations = Vec::new();
    let mut trajectory: Vec<AbilityEstimate> = Vec::new();

    let stop_reason = loop {
        if administered.len() >= budget {
            break StopReason::Budget;
        }
        let next = match config.strategy {
            Strategy::Fluid => {
                let theta = trajectory.last().map_or(prior.mean, |e| e.theta);
                most_informative(&items, &used, Ability(theta))
            }
            Strategy::Random | Strategy::RandomIrt => order.get(administered.len()).copied(),
        };
        let Some(index) = next else {
            break StopReason::BankExhausted;
        };
        used[index] = true;
        let item = items[index];
        let correct = oracle
            .answer(&item.item_id)
            .ok_or_else(|| Error::MissingAnswer(item.item_id.clone()))?;
        observations.push(Observation::new(item, correct));
        administered.push(Administered {
            item: item.clone(),
            correct,
        });
        let estimate = ability::estimate_from_observations(&observations, Method::Map, prior)?;
        trajectory.push(estimate);
        if config.se_threshold.is_some_and(|t| estimate.standard_error < t) {
            break StopReason::SeThreshold;
        }
    };

    let final_score = match config.strategy {
        Strategy::Random => {
            let responses: Vec<Response> = administered.iter().map(Administered::response).collect();
            metrics::accuracy(&responses)?
        }
        Strategy::Fluid | Strategy::RandomIrt => trajectory.last().map_or(prior.mean, |e| e.theta),
    };

    Ok(EvalSession {
        config: config.clone(),
        administered,
        trajectory,
        final_score,
        stop_reason,
    })
}

fn most_informative(items: &[&ItemParams], used: &[bool], ability: Ability) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (index, item) in items.iter().enumerate() {
        if used[index] {
            continue;
        }
        let info = irt::item_information(ability, item);
        if best.is_none_or(|(b, i)| better((info, &item.item_id), (b, &items[i].item_id))) {
            best = Some((info, index));
        }
    }
    best.map(|(_, i)| i)
}

/// Recomputes the estimate after every step from the logged responses.
pub fn replay(session: &EvalSession) -> Result<Vec<AbilityEstimate>> {
    let prior = session.config.prior();
    let mut observations = Vec::with_capacity(session.len());
    session
        .administered
        .iter()
        .map(|a| {
            observations.push(Observation::new(&a.item, a.correct));
            ability::estimate_from_observations(&observations, Method::Map, prior)
        })
        .collect()
}

/// Largest absolute difference between logged and replayed abilities.
pub fn replay_discrepancy(session: &EvalSession) -> Result<f64> {
    if session.trajectory.len() != session.administered.len() {
        return Err(Error::InvalidConfig(format!(
            "trajectory has {} entries for {} administered items",
            session.trajectory.len(),
            session.administered.len()
        )));
    }
    Ok(replay(session)?
        .iter()
        .zip(&session.trajectory)
        .map(|(a, b)| (a.theta - b.theta).abs())
        .fold(0.0, f64::max))
}
