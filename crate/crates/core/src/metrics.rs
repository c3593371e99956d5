//! Evaluation-quality measures over training curves and rankings.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irt::Response;

/// Scores of one model on one benchmark across training checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub model_id: String,
    pub benchmark_id: String,
    /// `(checkpoint_index, score)` with strictly increasing indices.
    pub points: Vec<(u64, f64)>,
}

impl TrainingCurve {
    pub fn new(model_id: impl Into<String>, benchmark_id: impl Into<String>, points: Vec<(u64, f64)>) -> Result<Self> {
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Metric("checkpoint indices must be strictly increasing".into()));
        }
        Ok(Self {
            model_id: model_id.into(),
            benchmark_id: benchmark_id.into(),
            points,
        })
    }

    /// Curve over checkpoints `0..scores.len()`.
    pub fn from_scores(scores: &[f64]) -> Self {
        Self {
            model_id: String::new(),
            benchmark_id: String::new(),
            points: scores.iter().enumerate().map(|(t, &s)| (t as u64, s)).collect(),
        }
    }

    pub fn scores(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }
}

pub fn accuracy(responses: &[Response]) -> Result<f64> {
    if responses.is_empty() {
        return Err(Error::Metric("accuracy of an empty response set".into()));
    }
    let correct = responses.iter().filter(|r| r.correct).count();
    Ok(correct as f64 / responses.len() as f64)
}

/// Normalized total variation: `n/(n-1) * sum |x[t+1] - x[t]| / |x[n] - x[1]|`.
/// Equals `n/(n-1)` for monotone curves and grows with back-and-forth
/// movement.
pub fn total_variation(curve: &TrainingCurve) -> Result<f64> {
    let x = curve.scores();
    let n = x.len();
    if n < 2 {
        return Err(Error::Metric("total variation needs at least 2 points".into()));
    }
    let net = (x[n - 1] - x[0]).abs();
    if net == 0.0 || !net.is_finite() {
        return Err(Error::Metric("degenerate endpoints: first and last scores are equal".into()));
    }
    let path: f64 = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let n = n as f64;
    Ok(n / (n - 1.0) * path / net)
}

/// Absolute Spearman correlation between checkpoint order and score.
pub fn monotonicity(curve: &TrainingCurve) -> Result<f64> {
    let x = curve.scores();
    if x.len() < 2 {
        return Err(Error::Metric("monotonicity needs at least 2 points".into()));
    }
    if x.iter().all(|&s| s == x[0]) {
        return Err(Error::Metric("degenerate curve: all scores are identical".into()));
    }
    let order: Vec<f64> = curve.points.iter().map(|p| p.0 as f64).collect();
    Ok(spearman(&order, &x).abs())
}

/// 1-based ranks in ascending order; tied values share their mean rank.
pub fn mean_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's rho as the Pearson correlation of mean ranks. Zero when either
/// side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&mean_ranks(x), &mean_ranks(y))
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Scores of a set of models; rank 1 is the highest score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    entries: Vec<(String, f64)>,
}

impl RankTable {
    pub fn new(entries: Vec<(String, f64)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (id, _) in &entries {
            if !seen.insert(id.as_str()) {
                return Err(Error::Metric(format!("duplicate model id `{id}` in rank table")));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    /// Rank per model; ties share the mean rank.
    pub fn ranks(&self) -> HashMap<&str, f64> {
        let negated: Vec<f64> = self.entries.iter().map(|e| -e.1).collect();
        self.entries
            .iter()
            .map(|e| e.0.as_str())
            .zip(mean_ranks(&negated))
            .collect()
    }
}

/// Mean absolute difference between the ranks two tables assign to each
/// model.
pub fn rank_distance(predicted: &RankTable, reference: &RankTable) -> Result<f64> {
    let p = predicted.ranks();
    let r = reference.ranks();
    let only_p: Vec<&str> = p.keys().filter(|k| !r.contains_key(*k)).copied().collect();
    let only_r: Vec<&str> = r.keys().filter(|k| !p.contains_key(*k)).copied().collect();
    if !only_p.is_empty() || !only_r.is_empty() {
        let mut only_p = only_p;
        let mut only_r = only_r;
        only_p.sort_unstable();
        only_r.sort_unstable();
        return Err(Error::Metric(format!(
            "rank tables cover different models: only predicted {only_p:?}, only reference {only_r:?}"
        )));
    }
    if p.len() < 2 {
        return Err(Error::Metric("rank distance needs at least 2 models".into()));
    }
    let total: f64 = predicted
        .entries
        .iter()
        .map(|(id, _)| (p[id.as_str()] - r[id.as_str()]).abs())
        .sum();
    Ok(total / p.len() as f64)
}

/// Mean gap between rank-adjacent abilities, `(max - min) / (count - 1)`.
/// A natural standard-error threshold for telling neighbours apart.
pub fn adjacent_ability_gap(abilities: &[f64]) -> Result<f64> {
    if abilities.len() < 2 {
        return Err(Error::Metric("need at least 2 abilities".into()));
    }
    let max = abilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = abilities.iter().copied().fold(f64::INFINITY, f64::min);
    if max == min {
        return Err(Error::Metric("abilities have no distinct values".into()));
    }
    Ok((max - min) / (abilities.len() - 1) as f64)
}

/// Unweighted mean of the values that are present; `None` if there are none.
pub fn mean_present(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(x: &[f64]) -> TrainingCurve {
        TrainingCurve::from_scores(x)
    }

    fn table(scores: &[f64]) -> RankTable {
        RankTable::new(scores.iter().enumerate().map(|(i, &s)| (format!("m{i}"), s)).collect()).unwrap()
    }

    #[test]
    fn accuracy_examples() {
        let r = |v: &[bool]| v.iter().map(|&c| Response::new("q", c)).collect::<Vec<_>>();
        assert_eq!(accuracy(&r(&[true, true, true])).unwrap(), 1.0);
        assert_eq!(accuracy(&r(&[true, false, false, true])).unwrap(), 0.5);
        assert_eq!(accuracy(&r(&[false])).unwrap(), 0.0);
        assert!(accuracy(&[]).is_err());
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&curve(&[0.0, 0.5, 1.0])).unwrap(), 1.5);
        assert_eq!(total_variation(&curve(&[0.0, 1.0, 0.0, 1.0])).unwrap(), 4.0);
        let tv = total_variation(&curve(&[0.0, 0.2, 0.1, 0.4])).unwrap();
        assert!((tv - 2.0).abs() < 1e-12);
        assert!(total_variation(&curve(&[0.3, 0.9, 0.3])).is_err());
        assert!(total_variation(&curve(&[0.3])).is_err());
    }

    #[test]
    fn monotonicity_examples() {
        assert_eq!(monotonicity(&curve(&[0.1, 0.4, 0.9, 1.3])).unwrap(), 1.0);
        assert_eq!(monotonicity(&curve(&[3.0, 2.0, -1.0])).unwrap(), 1.0);
        let c = TrainingCurve::new("m", "q", vec![(1, 1.0), (2, 3.0), (3, 2.0)]).unwrap();
        assert!((monotonicity(&c).unwrap() - 0.5).abs() < 1e-12);
        assert!(monotonicity(&curve(&[2.0, 2.0, 2.0])).is_err());
    }

    #[test]
    fn curve_requires_increasing_checkpoints() {
        assert!(TrainingCurve::new("m", "q", vec![(1, 0.0), (1, 1.0)]).is_err());
    }

    #[test]
    fn mean_ranks_share_ties() {
        assert_eq!(mean_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn rank_distance_examples() {
        assert_eq!(rank_distance(&table(&[1.0, 2.0, 3.0]), &table(&[5.0, 6.0, 9.0])).unwrap(), 0.0);
        assert_eq!(
            rank_distance(&table(&[1.0, 2.0, 3.0, 4.0]), &table(&[4.0, 3.0, 2.0, 1.0])).unwrap(),
            2.0
        );
        // Predicted ranks (1, 2, 3) against reference ranks (2, 1, 3).
        let d = rank_distance(&table(&[3.0, 2.0, 1.0]), &table(&[2.0, 3.0, 1.0])).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rank_distance_rejects_mismatched_models() {
        let other = RankTable::new(vec![("m0".into(), 1.0), ("zz".into(), 2.0)]).unwrap();
        let err = rank_distance(&table(&[1.0, 2.0]), &other).unwrap_err().to_string();
        assert!(err.contains("m1") && err.contains("zz"), "{err}");
        assert!(RankTable::new(vec![("a".into(), 1.0), ("a".into(), 2.0)]).is_err());
    }

    #[test]
    fn adjacent_gap_examples() {
        assert_eq!(adjacent_ability_gap(&[0.0, 1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(adjacent_ability_gap(&[-1.0, 0.0, 3.0]).unwrap(), 2.0);
        assert!(adjacent_ability_gap(&[5.0, 5.0, 5.0]).is_err());
        assert!(adjacent_ability_gap(&[1.0]).is_err());
    }

    #[test]
    fn mean_present_skips_missing() {
        assert_eq!(mean_present([Some(1.0), None, Some(3.0)]), Some(2.0));
        assert_eq!(mean_present([None]), None);
    }

    fn scores() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 2..40)
    }

    proptest! {
        #[test]
        fn tv_is_affine_invariant(x in scores(), a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], c in -3.0f64..3.0) {
            if let Ok(tv) = total_variation(&curve(&x)) {
                let y: Vec<f64> = x.iter().map(|v| a * v + c).collect();
                let tv2 = total_variation(&curve(&y)).unwrap();
                prop_assert!((tv - tv2).abs() < 1e-6 * tv);
            }
        }

        #[test]
        fn tv_lower_bound(x in scores()) {
            if let Ok(tv) = total_variation(&curve(&x)) {
                let n = x.len() as f64;
                let bound = n / (n - 1.0);
                prop_assert!(tv >= bound * (1.0 - 1e-12));
                let monotone = x.windows(2).all(|w| w[1] >= w[0]) || x.windows(2).all(|w| w[1] <= w[0]);
                if !monotone {
                    prop_assert!(tv > bound);
                }
            }
        }

        #[test]
        fn tv_of_sorted_curve_is_exact(mut x in prop::collection::vec(-10.0f64..10.0, 2..40)) {
            x.sort_by(f64::total_cmp);
            x.dedup();
            prop_assume!(x.len() >= 2);
            let n = x.len() as f64;
            let tv = total_variation(&curve(&x)).unwrap();
            prop_assert!((tv - n / (n - 1.0)).abs() < 1e-9);
        }

        #[test]
        fn monotonicity_is_rank_based(x in scores()) {
            if let Ok(m) = monotonicity(&curve(&x)) {
                let y: Vec<f64> = x.iter().map(|v| (v / 3.0).exp() - 7.0).collect();
                prop_assert!((m - monotonicity(&curve(&y)).unwrap()).abs() < 1e-9);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&m));
            }
        }

        #[test]
        fn rank_distance_is_symmetric(x in scores(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut y = x.clone();
            y.shuffle(&mut crate::seed::rng(seed));
            let (a, b) = (table(&x), table(&y));
            let d = rank_distance(&a, &b).unwrap();
            prop_assert!((d - rank_distance(&b, &a).unwrap()).abs() < 1e-12);
            let same_ranks = mean_ranks(&x) == mean_ranks(&y);
            prop_assert_eq!(d == 0.0, same_ranks);
        }
    }
}
