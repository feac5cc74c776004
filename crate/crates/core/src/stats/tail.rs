//! Hill estimation of a power-law tail `P(X > x) ~ c x^{-s}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillFit {
    pub s_hat: f64,
    /// Half-width of the 95% interval for `s_hat`.
    pub s_ci: f64,
    /// `(k/n) x_(k+1)^s_hat`, the level-based constant at the threshold.
    pub c_hat: f64,
    pub c_ci: f64,
    pub k: usize,
    pub threshold: f64,
}

/// Hill estimator on the `k_top` largest order statistics.
pub fn hill_fit(sample: &[f64], k_top: usize) -> Result<HillFit> {
    if k_top < 50 {
        return Err(Error::InsufficientData(format!("k_top = {k_top} < 50")));
    }
    if sample.len() <= k_top {
        return Err(Error::InsufficientData(format!("{} samples for k_top = {k_top}", sample.len())));
    }
    let mut x: Vec<f64> = sample.to_vec();
    x.sort_by(|a, b| b.total_cmp(a));
    let threshold = x[k_top];
    if threshold <= 0.0 {
        return Err(Error::InsufficientData("non-positive threshold".into()));
    }
    let lt = threshold.ln();
    let h = x[..k_top].iter().map(|v| v.ln() - lt).sum::<f64>() / k_top as f64;
    let s_hat = 1.0 / h;
    let k = k_top as f64;
    let c_hat = k / sample.len() as f64 * threshold.powf(s_hat);
    Ok(HillFit { s_hat, s_ci: 1.96 * s_hat / k.sqrt(), c_hat, c_ci: 1.96 * c_hat / k.sqrt(), k: k_top, threshold })
}
