//! Fitting 2PL item parameters and training-population abilities to a
//! binary response matrix by Markov chain Monte Carlo.
//!
//! The model is hierarchical: abilities, difficulties and
//! log-discriminations each come from a normal population whose location
//! has a normal(0, 1) prior and whose scale has a half-normal(1) prior.
//! Missing cells are left out of the likelihood. Point estimates are
//! posterior means, reported on the scale where the training abilities
//! have mean 0 and standard deviation 1.

mod diagnostics;
mod matrix;
mod sampler;

use serde::{Deserialize, Serialize};

pub use diagnostics::{split_rhat, Diagnostics, ParameterDiagnostics, RHAT_THRESHOLD};
pub use matrix::{validate_matrix, Finding, FindingKind, Location, ResponseMatrix, Severity};

use crate::error::{Error, Result};
use crate::irt::{Ability, ItemParams};
use crate::par::{self, Execution};
use sampler::{mean_sd, Observed, HYPER_NAMES};

/// Initial random-walk step sizes; adapted during burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProposalScales {
    pub theta: f64,
    pub log_discrimination: f64,
    pub difficulty: f64,
    pub hyper: f64,
}

impl Default for ProposalScales {
    fn default() -> Self {
        Self {
            theta: 0.5,
            log_discrimination: 0.3,
            difficulty: 0.5,
            hyper: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub chain_count: usize,
    pub iterations_per_chain: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub proposal_scales: ProposalScales,
    pub seed: u64,
    /// Whether chains run on the thread pool. Results do not depend on it.
    pub execution: Execution,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            chain_count: 4,
            iterations_per_chain: 5_000,
            burn_in: 2_500,
            thinning: 5,
            proposal_scales: ProposalScales::default(),
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.chain_count == 0 {
            return fail("chain_count must be positive");
        }
        if self.iterations_per_chain == 0 {
            return fail("iterations_per_chain must be positive");
        }
        if self.burn_in >= self.iterations_per_chain {
            return fail("burn_in must be smaller than iterations_per_chain");
        }
        if self.thinning == 0 {
            return fail("thinning must be positive");
        }
        let s = &self.proposal_scales;
        if [s.theta, s.log_discrimination, s.difficulty, s.hyper]
            .iter()
            .any(|x| !(x.is_finite() && *x > 0.0))
        {
            return fail("proposal scales must be positive");
        }
        Ok(())
    }

    /// Number of draws each chain keeps after burn-in and thinning.
    pub fn retained_draws(&self) -> usize {
        (self.iterations_per_chain - self.burn_in).div_ceil(self.thinning)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedBank {
    /// One entry per matrix column, in column order.
    pub items: Vec<ItemParams>,
    /// One entry per matrix row, standardized to mean 0 and sd 1.
    pub train_abilities: Vec<(String, Ability)>,
    pub diagnostics: Diagnostics,
}

/// Fits the hierarchical 2PL model. Identical inputs give bit-identical
/// output, whether or not chains run in parallel.
pub fn fit_2pl(matrix: &ResponseMatrix, config: &CalibrationConfig) -> Result<CalibratedBank> {
    config.validate()?;
    let errors: Vec<String> = validate_matrix(matrix)
        .into_iter()
        .filter(|f| f.severity == Severity::Error)
        .map(|f| f.to_string())
        .collect();
    if !errors.is_empty() {
        return Err(Error::InvalidMatrix(errors.join("; ")));
    }
    if matrix.n_models() < 2 || matrix.n_items() < 2 {
        return Err(Error::InvalidMatrix(format!(
            "need at least 2 models and 2 items, got {} x {}",
            matrix.n_models(),
            matrix.n_items()
        )));
    }

    let observed = Observed::new(matrix);
    let chains = par::map_indexed(config.execution, config.chain_count, |c| {
        sampler::run_chain(matrix, &observed, config, c)
    });

    let k = matrix.n_models();
    let l = matrix.n_items();
    let width = k + 2 * l;
    let total_draws: usize = chains.iter().map(|c| c.retained).sum();

    // Posterior means of ability, discrimination (not its log) and difficulty.
    let mut means = vec![0.0; width];
    for chain in &chains {
        for draw in chain.draws.chunks_exact(width) {
            for (p, value) in draw.iter().enumerate() {
                means[p] += if (k..k + l).contains(&p) { value.exp() } else { *value };
            }
        }
    }
    means.iter_mut().for_each(|m| *m /= total_draws as f64);

    let raw_items: Vec<ItemParams> = matrix
        .item_ids()
        .iter()
        .enumerate()
        .map(|(j, id)| ItemParams {
            item_id: id.clone(),
            discrimination: means[k + j],
            difficulty: means[k + l + j],
        })
        .collect();
    let (items, abilities) = standardize(&raw_items, &means[..k]);

    let diagnostics = collect_diagnostics(matrix, config, &chains);
    for warning in &diagnostics.warnings {
        log::warn!("{warning}");
    }

    Ok(CalibratedBank {
        items,
        train_abilities: matrix
            .model_ids()
            .iter()
            .cloned()
            .zip(abilities.into_iter().map(Ability))
            .collect(),
        diagnostics,
    })
}

/// Maps abilities to mean 0 and (population) sd 1 and applies the
/// compensating transform to the items, so that `a * (theta - b)` is
/// unchanged for every model/item pair.
pub fn standardize(items: &[ItemParams], abilities: &[f64]) -> (Vec<ItemParams>, Vec<f64>) {
    let (mean, sd) = mean_sd(abilities);
    let sd = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
    let abilities = abilities.iter().map(|t| (t - mean) / sd).collect();
    let items = items
        .iter()
        .map(|item| ItemParams {
            item_id: item.item_id.clone(),
            discrimination: item.discrimination * sd,
            difficulty: (item.difficulty - mean) / sd,
        })
        .collect();
    (items, abilities)
}

fn collect_diagnostics(matrix: &ResponseMatrix, config: &CalibrationConfig, chains: &[sampler::ChainOutput]) -> Diagnostics {
    let k = matrix.n_models();
    let l = matrix.n_items();
    let width = k + 2 * l;
    let counted = ((config.iterations_per_chain - config.burn_in) * chains.len()) as f64;

    let names = matrix
        .model_ids()
        .iter()
        .map(|id| format!("theta[{id}]"))
        .chain(matrix.item_ids().iter().map(|id| format!("log_a[{id}]")))
        .chain(matrix.item_ids().iter().map(|id| format!("b[{id}]")))
        .chain(HYPER_NAMES.iter().map(|s| s.to_string()));

    let mut parameters = Vec::with_capacity(width + HYPER_NAMES.len());
    let mut warnings = Vec::new();
    let mut max_rhat: Option<f64> = None;
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); chains.len()];

    for (p, name) in names.enumerate() {
        let accepted: usize = chains.iter().map(|c| c.accepted[p]).sum();
        let rhat = if p < width {
            for (chain, buf) in chains.iter().zip(series.iter_mut()) {
                buf.clear();
                buf.extend(chain.draws.chunks_exact(width).map(|d| d[p]));
            }
            let refs: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
            split_rhat(&refs)
        } else {
            None
        };
        if let Some(r) = rhat {
            max_rhat = Some(max_rhat.map_or(r, |m| m.max(r)));
            if r.is_nan() || r > RHAT_THRESHOLD {
                warnings.push(format!("{name} has not converged (split R-hat {r:.3})"));
            }
        }
        parameters.push(ParameterDiagnostics {
            name,
            acceptance_rate: accepted as f64 / counted,
            rhat,
        });
    }
    if max_rhat.is_none() {
        warnings.push("too few retained draws to compute split R-hat".to_string());
    }

    Diagnostics {
        parameters,
        max_rhat,
        retained_draws: chains.iter().map(|c| c.retained).sum(),
        warnings,
    }
}
