//! Goodness-of-fit tests, tail fits, correlation estimators and the
//! three-state absorbing chain.

pub mod chain;
pub mod chisq;
pub mod correlation;
pub mod ks;
pub mod tail;

use serde::{Deserialize, Serialize};

pub use chain::{chain_from_profile, chain_moments, ChainMoments, ThreeStateChain};
pub use chisq::poisson_count_test;
pub use correlation::{batch_means_se, pearson};
pub use ks::{ks_discrete, ks_statistic, ks_statistic_atoms, ks_test, ks_two_sample};
pub use tail::{hill_fit, HillFit};

/// How a [`TestReport`] is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Pass when the p-value exceeds the threshold.
    PValueAbove,
    /// Pass when the statistic is below the threshold.
    StatisticBelow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub n: usize,
    pub p_value: Option<f64>,
    pub threshold: f64,
    pub rule: Rule,
    pub passed: bool,
}

impl TestReport {
    pub fn new(statistic: f64, n: usize, p_value: Option<f64>) -> Self {
        TestReport { statistic, n, p_value, threshold: f64::NAN, rule: Rule::PValueAbove, passed: false }
    }

    /// Judge by `p > alpha`.
    pub fn p_above(mut self, alpha: f64) -> Self {
        self.rule = Rule::PValueAbove;
        self.threshold = alpha;
        self.passed = self.p_value.is_some_and(|p| p > alpha);
        self
    }

    /// Judge by `statistic < bound`.
    pub fn stat_below(mut self, bound: f64) -> Self {
        self.rule = Rule::StatisticBelow;
        self.threshold = bound;
        self.passed = self.statistic < bound;
        self
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = h.floor() as usize;
    let j = (i + 1).min(n - 1);
    sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}
