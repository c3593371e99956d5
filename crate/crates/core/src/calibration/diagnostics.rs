//! Convergence diagnostics for the calibration sampler.

use serde::{Deserialize, Serialize};

/// Values above this flag a parameter as not converged.
pub const RHAT_THRESHOLD: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDiagnostics {
    pub name: String,
    /// Post-burn-in Metropolis acceptance rate, pooled over chains.
    pub acceptance_rate: f64,
    /// Split-chain potential scale reduction; `None` for parameters that are
    /// not identified on their own (hyperparameters) or when too few draws
    /// were retained.
    pub rhat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub parameters: Vec<ParameterDiagnostics>,
    pub max_rhat: Option<f64>,
    pub retained_draws: usize,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn converged(&self) -> bool {
        self.max_rhat.is_some_and(|r| r <= RHAT_THRESHOLD)
    }

    pub fn get(&self, name: &str) -> Option<&ParameterDiagnostics> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

/// Split-chain R-hat over equally long chains. Each chain is cut into two
/// halves (dropping the middle draw when the length is odd) and the usual
/// between/within variance ratio is formed over the halves.
pub fn split_rhat(chains: &[&[f64]]) -> Option<f64> {
    let len = chains.iter().map(|c| c.len()).min()?;
    let half = len / 2;
    if half < 2 {
        return None;
    }
    let mut sequences: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    for chain in chains {
        sequences.push(&chain[..half]);
        sequences.push(&chain[len - half..len]);
    }
    let m = sequences.len() as f64;
    let n = half as f64;

    let means: Vec<f64> = sequences.iter().map(|s| s.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let between = n / (m - 1.0) * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>();
    let within = sequences
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;

    if within <= 0.0 {
        return Some(if between <= 0.0 { 1.0 } else { f64::INFINITY });
    }
    let pooled = (n - 1.0) / n * within + between / n;
    Some((pooled / within).sqrt())
}
