//! Three-state absorbing chain `{1, 2, absorbed}` with transient block
//! `[[p1, q1], [q2, p2]]` and absorption `eps` from state 2 only.
//!
//! Embedded in a walk, state 1 is a site `n1`, state 2 a site `n2 > n1`, and
//! the visit counts of the two states are `xi_{n1}` and `xi_{n2}`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::env_model::Environment;
use crate::error::{Error, Result};
use crate::occupancy::{compute_rho_with, RhoOptions, RhoProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeStateChain {
    /// 1 -> 1.
    pub p_bar: f64,
    /// 1 -> 2.
    pub q_bar: f64,
    /// 2 -> 1.
    pub q_dbar: f64,
    /// 2 -> 2.
    pub p_dbar: f64,
    /// 2 -> absorbed.
    pub eps: f64,
}

impl ThreeStateChain {
    pub fn new(p_bar: f64, q_bar: f64, q_dbar: f64, p_dbar: f64, eps: f64) -> Result<Self> {
        let all = [p_bar, q_bar, q_dbar, p_dbar, eps];
        if all.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!("transition probabilities {all:?} outside [0, 1]")));
        }
        if (p_bar + q_bar - 1.0).abs() > 1e-12 || (q_dbar + p_dbar + eps - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("rows do not sum to 1".into()));
        }
        if eps <= 0.0 || q_bar <= 0.0 {
            return Err(Error::InvalidArgument("absorption must be reachable from both states".into()));
        }
        Ok(ThreeStateChain { p_bar, q_bar, q_dbar, p_dbar, eps })
    }

    fn transient(&self) -> [[f64; 2]; 2] {
        [[self.p_bar, self.q_bar], [self.q_dbar, self.p_dbar]]
    }
}

/// First and mixed moments of the visit counts `(N1, N2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainMoments {
    /// `E_i N1`.
    pub u1: f64,
    pub u2: f64,
    /// `E_i N2`.
    pub v1: f64,
    pub v2: f64,
    /// `E_i [N1 N2]`.
    pub w1: f64,
    pub w2: f64,
    /// `Cov_1(N1, N2)`, equal to `Cov_2`.
    pub cov: f64,
    /// `Corr_1(N1, N2)`.
    pub corr: f64,
}

/// Closed forms from first-step analysis.
pub fn chain_moments(c: &ThreeStateChain) -> ChainMoments {
    let u1 = (c.eps + c.q_dbar) / (c.eps * c.q_bar);
    let u2 = c.q_dbar / (c.eps * c.q_bar);
    let v1 = 1.0 / c.eps;
    let v2 = v1;
    let cov = v1 * u2;
    let denom = ((u1 * u1 - u1) * (v2 * v2 - v2)).sqrt();
    ChainMoments {
        u1,
        u2,
        v1,
        v2,
        w1: v1 * (u1 + u2),
        w2: u2 * (v1 + v2),
        cov,
        corr: if denom > 0.0 { cov / denom } else { 0.0 },
    }
}

/// Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).expect("nonempty");
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// The same moments from the fundamental matrix `(I - Q)^{-1}`, solved
/// numerically. Also returns `E_1 N1^2` and `E_1 N2^2` for the variances.
pub fn chain_moments_linear(c: &ThreeStateChain) -> (ChainMoments, f64, f64) {
    let q = c.transient();
    let i_minus_q = vec![vec![1.0 - q[0][0], -q[0][1]], vec![-q[1][0], 1.0 - q[1][1]]];
    let solve = |rhs: Vec<f64>| solve_linear(i_minus_q.clone(), rhs);
    let qv = |x: &[f64]| [q[0][0] * x[0] + q[0][1] * x[1], q[1][0] * x[0] + q[1][1] * x[1]];
    // N_j counts the current state too: E_i N_j = 1{i=j} + sum_k Q_ik E_k N_j.
    let u = solve(vec![1.0, 0.0]);
    let v = solve(vec![0.0, 1.0]);
    let (qu, qvv) = (qv(&u), qv(&v));
    let w = solve(vec![qvv[0], qu[1]]);
    let s1 = solve(vec![1.0 + 2.0 * qu[0], 0.0]);
    let s2 = solve(vec![0.0, 1.0 + 2.0 * qvv[1]]);
    let cov = w[0] - u[0] * v[0];
    let var1 = s1[0] - u[0] * u[0];
    let var2 = s2[0] - v[0] * v[0];
    let m = ChainMoments {
        u1: u[0],
        u2: u[1],
        v1: v[0],
        v2: v[1],
        w1: w[0],
        w2: w[1],
        cov,
        corr: if var1 * var2 > 0.0 { cov / (var1 * var2).sqrt() } else { 0.0 },
    };
    (m, s1[0], s2[0])
}

/// Run the chain from state 1 until absorption; returns `(N1, N2)`.
pub fn simulate_chain<R: RngCore + ?Sized>(c: &ThreeStateChain, rng: &mut R) -> (u64, u64) {
    let (mut n1, mut n2) = (0u64, 0u64);
    let mut state = 1;
    loop {
        let u: f64 = rng.random();
        if state == 1 {
            n1 += 1;
            if u >= c.p_bar {
                state = 2;
            }
        } else {
            n2 += 1;
            if u < c.q_dbar {
                state = 1;
            } else if u >= c.q_dbar + c.p_dbar {
                return (n1, n2);
            }
        }
    }
}

/// `(P_{a+1}(hit a before b), P_{b-1}(hit a before b))` for the walk on `p`,
/// where `p[k]` is the probability at site `a + k`.
fn ruin_probabilities(p: &[f64]) -> (f64, f64) {
    let len = p.len() - 1; // b - a
                           // log t_k = sum_{j=a+1}^{k} ln alpha_j for k = a..b-1.
    let mut logs = Vec::with_capacity(len);
    let mut acc = 0.0;
    logs.push(0.0);
    for k in 1..len {
        acc += ((1.0 - p[k]) / p[k]).ln();
        logs.push(acc);
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let t: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = t.iter().sum();
    let from_right_of_a = t[1.min(len)..].iter().sum::<f64>() / total;
    let from_left_of_b = t[len - 1] / total;
    (from_right_of_a, from_left_of_b)
}

/// Embedded chain on `{n1, n2}` for the environment behind `profile`.
pub fn chain_from_profile(profile: &RhoProfile, n1: usize, n2: usize) -> Result<ThreeStateChain> {
    if n1 >= n2 {
        return Err(Error::InvalidArgument(format!("need n1 < n2 (got {n1}, {n2})")));
    }
    if n2 >= profile.len() {
        return Err(Error::WindowTooSmall(format!("site {n2} beyond the profile ({} sites)", profile.len())));
    }
    let p = &profile.p[n1..=n2];
    let (h_a, h_b) = ruin_probabilities(p);
    let (pa, pb) = (p[0], p[p.len() - 1]);
    let (qa, qb) = (1.0 - pa, 1.0 - pb);
    let eps = 1.0 / profile.rho[n2];
    let q_dbar = qb * h_b;
    Ok(ThreeStateChain {
        p_bar: qa + pa * h_a,
        q_bar: pa * (1.0 - h_a),
        q_dbar,
        p_dbar: (1.0 - q_dbar - eps).max(0.0),
        eps,
    })
}

/// Convenience wrapper computing the profile first.
pub fn chain_from_walk(env: &Environment, n1: usize, n2: usize) -> Result<ThreeStateChain> {
    let prof = compute_rho_with(env, n2 + 1, &RhoOptions { tol: 1e-12, ..RhoOptions::default() })?;
    chain_from_profile(&prof, n1, n2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::{sample_environment, EnvironmentModel};
    use crate::occupancy::compute_rho;
    use crate::seeds::walk_rng;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn pinned_chain_example() {
        let c = ThreeStateChain::new(0.4, 0.6, 0.3, 0.5, 0.2).unwrap();
        let m = chain_moments(&c);
        assert!(rel(m.u1, 0.5 / 0.12) < 1e-14);
        assert!(rel(m.u2, 2.5) < 1e-14);
        assert!(rel(m.v1, 5.0) < 1e-14);
        assert!(rel(m.cov, 12.5) < 1e-14);
        let (l, _, _) = chain_moments_linear(&c);
        assert!(rel(l.u1, m.u1) < 1e-12 && rel(l.cov, m.cov) < 1e-12 && rel(l.corr, m.corr) < 1e-12);
    }

    #[test]
    fn no_backtracking() {
        let c = ThreeStateChain::new(0.3, 0.7, 0.0, 0.0, 1.0).unwrap();
        let m = chain_moments(&c);
        assert!(rel(m.u1, 1.0 / 0.7) < 1e-14);
        assert_eq!(m.cov, 0.0);
    }

    #[test]
    fn monte_carlo_agrees() {
        let c = ThreeStateChain::new(0.4, 0.6, 0.3, 0.5, 0.2).unwrap();
        let m = chain_moments(&c);
        let mut rng = walk_rng(31);
        let runs = 200_000;
        let draws: Vec<(f64, f64)> =
            (0..runs).map(|_| simulate_chain(&c, &mut rng)).map(|(a, b)| (a as f64, b as f64)).collect();
        let x: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let y: Vec<f64> = draws.iter().map(|d| d.1).collect();
        let (mx, sx) = super::super::mean_se(&x);
        let (my, sy) = super::super::mean_se(&y);
        assert!((mx - m.u1).abs() < 4.0 * sx);
        assert!((my - m.v1).abs() < 4.0 * sy);
        let xy: Vec<f64> = draws.iter().map(|d| d.0 * d.1).collect();
        let (mxy, sxy) = super::super::mean_se(&xy);
        assert!((mxy - m.w1).abs() < 4.0 * sxy);
    }

    #[test]
    fn adjacent_sites_in_constant_environment() {
        let env = Environment::from_values(0, vec![2.0 / 3.0; 200]).unwrap();
        let prof = compute_rho(&env, 100, 1e-12).unwrap();
        let c = chain_from_profile(&prof, 10, 11).unwrap();
        assert!((c.p_bar - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.q_bar - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.q_dbar - 1.0 / 3.0).abs() < 1e-15);
        // No return to a site: 1/rho = p - q = 1/3.
        assert!((c.eps - 1.0 / 3.0).abs() < 1e-10);
        // V1 is the mean occupation of the second site.
        assert!((chain_moments(&c).v1 - prof.rho[11]).abs() < 1e-9);
        // Mean of N1 from state 1 is rho of the first site.
        assert!((chain_moments(&c).u1 - prof.rho[10]).abs() < 1e-9);
    }

    #[test]
    fn general_pairs_reproduce_occupations() {
        let m = EnvironmentModel::two_point_alpha(2.0, 0.25, 0.5, None).unwrap();
        let env = sample_environment(&m, 0, 300, 4).unwrap();
        let prof = compute_rho(&env, 300, 1e-12).unwrap();
        for (a, b) in [(5, 6), (5, 9), (40, 120), (0, 250)] {
            let c = chain_from_profile(&prof, a, b).unwrap();
            let mom = chain_moments(&c);
            assert!(rel(mom.u1, prof.rho[a]) < 1e-9, "{a} {b}: {} vs {}", mom.u1, prof.rho[a]);
            assert!(rel(mom.v1, prof.rho[b]) < 1e-12);
        }
        assert!(chain_from_profile(&prof, 5, 5).is_err());
        assert!(matches!(chain_from_profile(&prof, 5, 400), Err(Error::WindowTooSmall(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn closed_forms_match_linear_solve(qb in 0.01f64..0.99, qd in 0.0f64..0.98, frac in 0.01f64..0.99) {
            let eps = (1.0 - qd) * frac;
            let pd = 1.0 - qd - eps;
            let c = ThreeStateChain::new(1.0 - qb, qb, qd, pd, eps).unwrap();
            let m = chain_moments(&c);
            let (l, _, _) = chain_moments_linear(&c);
            for (a, b) in [(m.u1, l.u1), (m.u2, l.u2.max(1e-300)), (m.v1, l.v1), (m.v2, l.v2),
                           (m.w1, l.w1), (m.cov, l.cov.max(1e-300)), (m.corr, l.corr.max(1e-300))] {
                if a != 0.0 || b > 1e-300 {
                    prop_assert!(rel(a, b) < 1e-12 || (a - b).abs() < 1e-12, "{:?} {:?}", m, l);
                }
            }
        }

        #[test]
        fn correlation_bounds(qb in 0.2f64..0.95, qd in 0.2f64..0.8, eps in 1e-4f64..0.02) {
            let c_low = qb.min(qd);
            prop_assume!(eps <= c_low / 10.0 && qd + eps < 1.0);
            let ch = ThreeStateChain::new(1.0 - qb, qb, qd, 1.0 - qd - eps, eps).unwrap();
            let m = chain_moments(&ch);
            prop_assert!(m.corr >= 1.0 - eps / c_low);
            prop_assert!(m.corr >= 1.0 - 1.0 / (c_low * m.u1));
        }
    }
}
