//! Ability estimation for a single test-taker with item parameters held
//! fixed, by maximum a posteriori (default) or maximum likelihood.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irt::{self, ItemParams, Response, ABILITY_MAX, ABILITY_MIN};

const MAX_ITERATIONS: usize = 100;
const STEP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Map,
    Mle,
}

/// Normal prior on ability used by MAP estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub mean: f64,
    pub sd: f64,
}

impl Default for Prior {
    fn default() -> Self {
        Self { mean: 0.0, sd: 1.0 }
    }
}

impl Prior {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        let prior = Self { mean, sd };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() || !(self.sd.is_finite() && self.sd > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "prior needs a finite mean and positive sd, got mean={} sd={}",
                self.mean, self.sd
            )));
        }
        Ok(())
    }

    pub fn precision(&self) -> f64 {
        1.0 / (self.sd * self.sd)
    }
}

/// A scored response stripped down to what the likelihood needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub discrimination: f64,
    pub difficulty: f64,
    pub correct: bool,
}

impl Observation {
    pub fn new(item: &ItemParams, correct: bool) -> Self {
        Self {
            discrimination: item.discrimination,
            difficulty: item.difficulty,
            correct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbilityEstimate {
    pub theta: f64,
    /// Infinite when the responses carry no information.
    pub standard_error: f64,
    pub method: Method,
    pub response_count: usize,
    /// Set when the maximizer lies on the boundary of the operational range.
    pub clamped: bool,
}

pub fn estimate_ability(
    responses: &[(Response, ItemParams)],
    method: Method,
    prior: Prior,
) -> Result<AbilityEstimate> {
    let mut observations = Vec::with_capacity(responses.len());
    for (response, item) in responses {
        irt::check_pair(response, item)?;
        observations.push(Observation::new(item, response.correct));
    }
    estimate_from_observations(&observations, method, prior)
}

/// Log-likelihood, plus the log prior density (up to a constant) for MAP.
pub fn objective(observations: &[Observation], theta: f64, method: Method, prior: Prior) -> f64 {
    let ll: f64 = observations
        .iter()
        .map(|o| irt::log_prob(theta, o.discrimination, o.difficulty, o.correct))
        .sum();
    match method {
        Method::Mle => ll,
        Method::Map => {
            let z = (theta - prior.mean) / prior.sd;
            ll - 0.5 * z * z
        }
    }
}

fn derivatives(observations: &[Observation], theta: f64, method: Method, prior: Prior) -> (f64, f64) {
    let (mut gradient, mut hessian) = (0.0, 0.0);
    for o in observations {
        let p = irt::probability(theta, o.discrimination, o.difficulty);
        let u = if o.correct { 1.0 } else { 0.0 };
        gradient += o.discrimination * (u - p);
        hessian -= o.discrimination * o.discrimination * p * (1.0 - p);
    }
    if method == Method::Map {
        gradient -= (theta - prior.mean) * prior.precision();
        hessian -= prior.precision();
    }
    (gradient, hessian)
}

pub fn estimate_from_observations(
    observations: &[Observation],
    method: Method,
    prior: Prior,
) -> Result<AbilityEstimate> {
    prior.validate()?;
    if method == Method::Mle {
        let correct = observations.iter().filter(|o| o.correct).count();
        if correct == 0 || correct == observations.len() {
            return Err(Error::DivergentEstimate(format!(
                "maximum likelihood needs both correct and incorrect responses ({correct} of {} correct)",
                observations.len()
            )));
        }
    }

    let (theta, clamped) = maximize(observations, method, prior);
    let information: f64 = observations
        .iter()
        .map(|o| irt::information(theta, o.discrimination, o.difficulty))
        .sum();
    let total = match method {
        Method::Map => information + prior.precision(),
        Method::Mle => information,
    };
    Ok(AbilityEstimate {
        theta,
        standard_error: irt::standard_error(total),
        method,
        response_count: observations.len(),
        clamped,
    })
}

/// Safeguarded Newton iteration on the concave objective: Newton steps are
/// taken while they stay inside the current sign bracket of the gradient,
/// bisection otherwise.
fn maximize(observations: &[Observation], method: Method, prior: Prior) -> (f64, bool) {
    // Summing in a canonical order makes the estimate independent of the
    // order items were administered in, down to the last bit.
    let mut sorted = observations.to_vec();
    sorted.sort_by(|x, y| {
        x.discrimination
            .total_cmp(&y.discrimination)
            .then(x.difficulty.total_cmp(&y.difficulty))
            .then(x.correct.cmp(&y.correct))
    });
    let observations = &sorted[..];
    let mut lo = ABILITY_MIN;
    let mut hi = ABILITY_MAX;
    if derivatives(observations, lo, method, prior).0 <= 0.0 {
        return (lo, true);
    }
    if derivatives(observations, hi, method, prior).0 >= 0.0 {
        return (hi, true);
    }

    let mut theta = prior.mean.clamp(lo, hi);
    for _ in 0..MAX_ITERATIONS {
        let (gradient, hessian) = derivatives(observations, theta, method, prior);
        if gradient == 0.0 {
            break;
        }
        if gradient > 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let newton = theta - gradient / hessian;
        let next = if hessian < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - theta).abs();
        theta = next;
        if step < STEP_TOLERANCE {
            break;
        }
    }
    (theta, false)
}
