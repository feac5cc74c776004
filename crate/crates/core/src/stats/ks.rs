//! Kolmogorov–Smirnov statistics with asymptotic p-values.

use super::TestReport;

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-theta form converges fast for small arguments.
        let t = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            cdf += (m * m * t).exp();
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// p-value of a KS distance for effective sample size `ne`, with Stephens'
/// finite-sample correction.
pub fn ks_pvalue(d: f64, ne: f64) -> f64 {
    let r = ne.sqrt();
    kolmogorov_sf((r + 0.12 + 0.11 / r) * d)
}

/// Sup distance between the ECDF of `sample` and a continuous `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// KS distance when `cdf` may have atoms at sample values: ties are grouped
/// and the left limit is taken just below each value.
pub fn ks_statistic_atoms<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < x.len() {
        let v = x[i];
        let j = i + x[i..].partition_point(|&y| y <= v);
        let left = cdf(v - 1e-9 * v.abs().max(1.0));
        d = d.max((j as f64 / n - cdf(v)).abs()).max((i as f64 / n - left).abs());
        i = j;
    }
    d
}

pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> TestReport {
    let d = ks_statistic(sample, cdf);
    TestReport::new(d, sample.len(), Some(ks_pvalue(d, sample.len() as f64)))
}

/// KS distance for integer data against an integer-supported `cdf`
/// (`cdf(k) = P(X <= k)`). Both step functions jump only at integers, so
/// checking each observed value and its predecessor is exact.
pub fn ks_discrete<F: Fn(i64) -> f64>(sample: &[i64], cdf: F) -> TestReport {
    let mut x = sample.to_vec();
    x.sort_unstable();
    let n = x.len() as f64;
    let mut d = 0.0f64;
    let mut below = 0.0;
    let mut i = 0;
    while i < x.len() {
        let v = x[i];
        let mut j = i;
        while j < x.len() && x[j] == v {
            j += 1;
        }
        d = d.max((below - cdf(v - 1)).abs());
        let here = j as f64 / n;
        d = d.max((here - cdf(v)).abs());
        below = here;
        i = j;
    }
    TestReport::new(d, x.len(), Some(ks_pvalue(d, n)))
}

/// Two-sample KS distance and p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestReport {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    TestReport::new(d, x.len() + y.len(), Some(ks_pvalue(d, n * m / (n + m))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::walk_rng;
    use rand::Rng;

    #[test]
    fn sf_matches_known_values() {
        // Critical values of the Kolmogorov distribution.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.0) - 0.26999967).abs() < 1e-6);
        // Both branches agree where they meet.
        let a = kolmogorov_sf(1.18 - 1e-9);
        let b = kolmogorov_sf(1.18 + 1e-9);
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn own_ecdf_has_zero_distance() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let r = ks_two_sample(&x, &x);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, Some(1.0));
    }

    #[test]
    fn uniform_passes_shifted_fails() {
        let mut rng = walk_rng(2024);
        let u: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let r = ks_test(&u, |x| x.clamp(0.0, 1.0)).p_above(0.01);
        assert!(r.passed, "{r:?}");
        let shifted: Vec<f64> = u.iter().map(|x| x + 0.05).collect();
        assert!(!ks_test(&shifted, |x| x.clamp(0.0, 1.0)).p_above(0.01).passed);
        assert!(!ks_two_sample(&u, &shifted).p_above(0.01).passed);
    }

    #[test]
    fn discrete_geometric() {
        let mut rng = walk_rng(5);
        let p: f64 = 0.3;
        let x: Vec<i64> = (0..20_000)
            .map(|_| {
                let mut k = 1;
                while rng.random::<f64>() >= p {
                    k += 1;
                }
                k
            })
            .collect();
        let cdf = |k: i64| if k < 1 { 0.0 } else { 1.0 - (1.0 - p).powi(k as i32) };
        let r = ks_discrete(&x, cdf);
        assert!(r.statistic < 0.015, "{r:?}");
        let wrong = |k: i64| if k < 1 { 0.0 } else { 1.0 - 0.75f64.powi(k as i32) };
        assert!(ks_discrete(&x, wrong).statistic > 0.04);
    }

    #[test]
    fn discrete_matches_brute_force_scan() {
        let x = [1i64, 1, 2, 5, 5, 5, 9];
        let cdf = |k: i64| (k as f64 / 10.0).clamp(0.0, 1.0);
        let r = ks_discrete(&x, cdf);
        let mut brute = 0.0f64;
        for k in -2..12 {
            let fe = x.iter().filter(|&&v| v <= k).count() as f64 / x.len() as f64;
            brute = brute.max((fe - cdf(k)).abs());
        }
        assert!((r.statistic - brute).abs() < 1e-15);
    }
}
