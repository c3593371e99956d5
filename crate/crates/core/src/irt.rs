//! Pointwise two-parameter logistic (2PL) model.
//!
//! Everything here is a pure function of item parameters and an ability
//! value. The probability of a correct response is
//! `logistic(a * (theta - b))`, and the Fisher information an item carries
//! about `theta` is `a^2 * p * (1 - p)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower and upper bound of the operational ability scale.
pub const ABILITY_MIN: f64 = -10.0;
pub const ABILITY_MAX: f64 = 10.0;

/// Probabilities are kept this far away from 0 and 1 before taking logs.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Calibrated parameters of one benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    pub item_id: String,
    /// Slope of the characteristic curve, strictly positive.
    pub discrimination: f64,
    /// Ability at which a correct response has probability one half.
    pub difficulty: f64,
}

impl ItemParams {
    pub fn new(item_id: impl Into<String>, discrimination: f64, difficulty: f64) -> Result<Self> {
        let item = Self {
            item_id: item_id.into(),
            discrimination,
            difficulty,
        };
        item.validate()?;
        Ok(item)
    }

    pub fn validate(&self) -> Result<()> {
        let reason = if !self.discrimination.is_finite() {
            "discrimination is not finite"
        } else if self.discrimination <= 0.0 {
            "discrimination must be positive"
        } else if !self.difficulty.is_finite() {
            "difficulty is not finite"
        } else {
            return Ok(());
        };
        Err(Error::InvalidItem {
            item_id: self.item_id.clone(),
            reason: reason.to_string(),
        })
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }
}

/// Latent ability of a test-taker.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ability(pub f64);

impl Ability {
    pub fn theta(self) -> f64 {
        self.0
    }

    /// Restricts the ability to the operational range.
    pub fn clamped(self) -> Self {
        Ability(self.0.clamp(ABILITY_MIN, ABILITY_MAX))
    }
}

impl From<f64> for Ability {
    fn from(theta: f64) -> Self {
        Ability(theta)
    }
}

/// Observed outcome of administering one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub item_id: String,
    pub correct: bool,
}

impl Response {
    pub fn new(item_id: impl Into<String>, correct: bool) -> Self {
        Self {
            item_id: item_id.into(),
            correct,
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `logistic(a * (theta - b))` on raw parameters.
#[inline]
pub fn probability(theta: f64, discrimination: f64, difficulty: f64) -> f64 {
    logistic(discrimination * (theta - difficulty))
}

pub fn response_probability(ability: Ability, item: &ItemParams) -> f64 {
    probability(ability.0, item.discrimination, item.difficulty)
}

#[inline]
pub fn information(theta: f64, discrimination: f64, difficulty: f64) -> f64 {
    let p = probability(theta, discrimination, difficulty);
    discrimination * discrimination * p * (1.0 - p)
}

pub fn item_information(ability: Ability, item: &ItemParams) -> f64 {
    information(ability.0, item.discrimination, item.difficulty)
}

/// Log-probability of one binary outcome with the probability clamped away
/// from 0 and 1.
#[inline]
pub fn log_prob(theta: f64, discrimination: f64, difficulty: f64, correct: bool) -> f64 {
    let x = discrimination * (theta - difficulty);
    let p = if correct { logistic(x) } else { logistic(-x) };
    p.clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR).ln()
}

/// Bernoulli log-likelihood of a set of responses at a fixed ability.
///
/// Each response must be paired with the item it answers.
pub fn log_likelihood(responses: &[(Response, ItemParams)], ability: Ability) -> Result<f64> {
    let mut total = 0.0;
    for (response, item) in responses {
        check_pair(response, item)?;
        total += log_prob(
            ability.0,
            item.discrimination,
            item.difficulty,
            response.correct,
        );
    }
    Ok(total)
}

pub(crate) fn check_pair(response: &Response, item: &ItemParams) -> Result<()> {
    if response.item_id != item.item_id {
        return Err(Error::ItemMismatch {
            response: response.item_id.clone(),
            item: item.item_id.clone(),
        });
    }
    item.validate()
}

pub fn test_information<'a, I>(items: I, ability: Ability) -> f64
where
    I: IntoIterator<Item = &'a ItemParams>,
{
    items
        .into_iter()
        .map(|item| item_information(ability, item))
        .sum()
}

/// `1 / sqrt(information)`, infinite when there is no information.
pub fn standard_error(total_information: f64) -> f64 {
    if total_information <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / total_information.sqrt()
    }
}
