//! Random-walk Metropolis-within-Gibbs over the hierarchical 2PL posterior.
//!
//! Every scalar parameter is its own block with its own random stream,
//! keyed by the parameter's identity, so adding models or items leaves the
//! streams of existing parameters untouched.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{CalibrationConfig, ResponseMatrix};
use crate::irt;
use crate::seed;

const ADAPT_INTERVAL: usize = 50;
const TARGET_ACCEPTANCE: (f64, f64) = (0.30, 0.45);
const ADAPT_FACTOR: f64 = 1.2;

/// Observed cells indexed both ways.
pub(super) struct Observed {
    pub by_model: Vec<Vec<(u32, bool)>>,
    pub by_item: Vec<Vec<(u32, bool)>>,
}

impl Observed {
    pub fn new(matrix: &ResponseMatrix) -> Self {
        let mut by_model = vec![Vec::new(); matrix.n_models()];
        let mut by_item = vec![Vec::new(); matrix.n_items()];
        for (i, row) in matrix.rows().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if let Some(u) = *cell {
                    by_model[i].push((j as u32, u));
                    by_item[j].push((i as u32, u));
                }
            }
        }
        Self { by_model, by_item }
    }
}

/// Hierarchical group: a location and log-scale with their own streams.
struct Group {
    mu: f64,
    log_sigma: f64,
}

impl Group {
    fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    fn log_prior(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma();
        -0.5 * z * z
    }
}

/// A single random-walk block: its stream, proposal scale and counters.
struct Block {
    rng: ChaCha8Rng,
    scale: f64,
    batch_accepted: usize,
    accepted: usize,
}

impl Block {
    fn new(seed: u64, scale: f64) -> Self {
        Self {
            rng: seed::rng(seed),
            scale,
            batch_accepted: 0,
            accepted: 0,
        }
    }

    fn propose(&mut self, current: f64) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        current + self.scale * z
    }

    fn accept(&mut self, log_ratio: f64, counting: bool) -> bool {
        let ok = log_ratio >= 0.0 || self.rng.random::<f64>().ln() < log_ratio;
        if ok {
            self.batch_accepted += 1;
            if counting {
                self.accepted += 1;
            }
        }
        ok
    }

    fn adapt(&mut self) {
        let rate = self.batch_accepted as f64 / ADAPT_INTERVAL as f64;
        if rate < TARGET_ACCEPTANCE.0 {
            self.scale /= ADAPT_FACTOR;
        } else if rate > TARGET_ACCEPTANCE.1 {
            self.scale *= ADAPT_FACTOR;
        }
        self.batch_accepted = 0;
    }
}

pub(super) struct ChainOutput {
    /// Retained draws, one row of `k + 2l` values per draw: standardized
    /// abilities, then log-discriminations, then difficulties.
    pub draws: Vec<f64>,
    pub retained: usize,
    /// Accepted proposals after burn-in, in parameter order followed by the
    /// six hyperparameters.
    pub accepted: Vec<usize>,
}

pub(super) const HYPER_NAMES: [&str; 6] = [
    "mu_theta",
    "log_sigma_theta",
    "mu_log_a",
    "log_sigma_log_a",
    "mu_b",
    "log_sigma_b",
];

pub(super) fn run_chain(
    matrix: &ResponseMatrix,
    observed: &Observed,
    config: &CalibrationConfig,
    chain: usize,
) -> ChainOutput {
    let k = matrix.n_models();
    let l = matrix.n_items();
    let chain_seed = seed::derive(config.seed, chain as u64);
    let scales = &config.proposal_scales;

    let mut theta_blocks: Vec<Block> = matrix
        .model_ids()
        .iter()
        .map(|id| Block::new(seed::derive_label(chain_seed, &format!("theta/{id}")), scales.theta))
        .collect();
    let mut log_a_blocks: Vec<Block> = matrix
        .item_ids()
        .iter()
        .map(|id| Block::new(seed::derive_label(chain_seed, &format!("log_a/{id}")), scales.log_discrimination))
        .collect();
    let mut b_blocks: Vec<Block> = matrix
        .item_ids()
        .iter()
        .map(|id| Block::new(seed::derive_label(chain_seed, &format!("b/{id}")), scales.difficulty))
        .collect();
    let mut hyper_blocks: Vec<Block> = HYPER_NAMES
        .iter()
        .map(|name| Block::new(seed::derive_label(chain_seed, &format!("hyper/{name}")), scales.hyper))
        .collect();

    let mut init_rng = seed::rng(seed::derive_label(chain_seed, "init"));
    let (mut theta, mut log_a, mut b) = initial_state(matrix, observed, &mut init_rng);
    let mut a: Vec<f64> = log_a.iter().map(|x| x.exp()).collect();
    let mut groups = [
        group_from(&theta),
        Group {
            mu: 0.0,
            log_sigma: 0.5f64.ln(),
        },
        group_from(&b),
    ];

    let retained = config.retained_draws();
    let width = k + 2 * l;
    let mut draws = Vec::with_capacity(retained * width);

    for iteration in 0..config.iterations_per_chain {
        let counting = iteration >= config.burn_in;

        for i in 0..k {
            let block = &mut theta_blocks[i];
            let current = theta[i];
            let proposal = block.propose(current);
            let mut log_ratio = groups[0].log_prior(proposal) - groups[0].log_prior(current);
            for &(j, u) in &observed.by_model[i] {
                let j = j as usize;
                log_ratio += irt::log_prob(proposal, a[j], b[j], u) - irt::log_prob(current, a[j], b[j], u);
            }
            if block.accept(log_ratio, counting) {
                theta[i] = proposal;
            }
        }

        for j in 0..l {
            let block = &mut log_a_blocks[j];
            let current = log_a[j];
            let proposal = block.propose(current);
            let proposed_a = proposal.exp();
            let mut log_ratio = groups[1].log_prior(proposal) - groups[1].log_prior(current);
            for &(i, u) in &observed.by_item[j] {
                let t = theta[i as usize];
                log_ratio += irt::log_prob(t, proposed_a, b[j], u) - irt::log_prob(t, a[j], b[j], u);
            }
            if block.accept(log_ratio, counting) {
                log_a[j] = proposal;
                a[j] = proposed_a;
            }

            let block = &mut b_blocks[j];
            let current = b[j];
            let proposal = block.propose(current);
            let mut log_ratio = groups[2].log_prior(proposal) - groups[2].log_prior(current);
            for &(i, u) in &observed.by_item[j] {
                let t = theta[i as usize];
                log_ratio += irt::log_prob(t, a[j], proposal, u) - irt::log_prob(t, a[j], current, u);
            }
            if block.accept(log_ratio, counting) {
                b[j] = proposal;
            }
        }

        for (g, values) in [&theta, &log_a, &b].into_iter().enumerate() {
            let (mu_block, rest) = hyper_blocks[2 * g..].split_first_mut().unwrap();
            update_group(&mut groups[g], values, mu_block, &mut rest[0], counting);
        }

        if !counting && (iteration + 1) % ADAPT_INTERVAL == 0 {
            theta_blocks
                .iter_mut()
                .chain(&mut log_a_blocks)
                .chain(&mut b_blocks)
                .chain(&mut hyper_blocks)
                .for_each(Block::adapt);
        }

        if counting && (iteration - config.burn_in).is_multiple_of(config.thinning) {
            push_standardized(&mut draws, &theta, &log_a, &b);
        }
    }

    let accepted = theta_blocks
        .iter()
        .chain(&log_a_blocks)
        .chain(&b_blocks)
        .chain(&hyper_blocks)
        .map(|blk| blk.accepted)
        .collect();
    ChainOutput {
        retained: draws.len() / width,
        draws,
        accepted,
    }
}

/// Conditional log-density of a hierarchical group's location and log-scale
/// given its members: normal(0, 1) on the location, half-normal(1) on the
/// scale (with the Jacobian of the log transform).
fn group_log_density(mu: f64, log_sigma: f64, values: &[f64]) -> f64 {
    let sigma = log_sigma.exp();
    let ss: f64 = values.iter().map(|x| (x - mu).powi(2)).sum();
    let n = values.len() as f64;
    -n * log_sigma - ss / (2.0 * sigma * sigma) - 0.5 * mu * mu - 0.5 * sigma * sigma + log_sigma
}

fn update_group(group: &mut Group, values: &[f64], mu_block: &mut Block, sigma_block: &mut Block, counting: bool) {
    let current = group_log_density(group.mu, group.log_sigma, values);
    let mu = mu_block.propose(group.mu);
    let proposed = group_log_density(mu, group.log_sigma, values);
    let current = if mu_block.accept(proposed - current, counting) {
        group.mu = mu;
        proposed
    } else {
        current
    };
    let log_sigma = sigma_block.propose(group.log_sigma);
    let proposed = group_log_density(group.mu, log_sigma, values);
    if sigma_block.accept(proposed - current, counting) {
        group.log_sigma = log_sigma;
    }
}

fn group_from(values: &[f64]) -> Group {
    let (mean, sd) = mean_sd(values);
    Group {
        mu: mean,
        log_sigma: sd.max(0.1).ln(),
    }
}

pub(super) fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Starting point from smoothed marginal proportions, jittered per chain so
/// that split-chain diagnostics see overdispersed starts.
fn initial_state(matrix: &ResponseMatrix, observed: &Observed, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let logit = |cells: &[(u32, bool)]| {
        let correct = cells.iter().filter(|c| c.1).count() as f64;
        let p = (correct + 0.5) / (cells.len() as f64 + 1.0);
        (p / (1.0 - p)).ln()
    };
    let mut jitter = |sd: f64| sd * rng.sample::<f64, _>(StandardNormal);

    let raw: Vec<f64> = observed.by_model.iter().map(|c| logit(c)).collect();
    let (mean, sd) = mean_sd(&raw);
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let theta = raw.iter().map(|x| (x - mean) / sd + jitter(0.5)).collect();
    let b = observed.by_item.iter().map(|c| -logit(c) + jitter(0.5)).collect();
    let log_a = (0..matrix.n_items()).map(|_| jitter(0.2)).collect();
    (theta, log_a, b)
}

/// Removes the location/scale indeterminacy of a single draw by mapping the
/// abilities to mean 0 and sd 1 and compensating in the item parameters.
fn push_standardized(out: &mut Vec<f64>, theta: &[f64], log_a: &[f64], b: &[f64]) {
    let (mean, sd) = mean_sd(theta);
    let sd = if sd > 0.0 { sd } else { 1.0 };
    out.extend(theta.iter().map(|t| (t - mean) / sd));
    out.extend(log_a.iter().map(|x| x + sd.ln()));
    out.extend(b.iter().map(|x| (x - mean) / sd));
}
