//! Quenched expected occupation numbers.
//!
//! `z_n = 1 + alpha_{n+1} z_{n+1}` and `rho_n = z_n / p_n`, run backwards
//! from `z = 1` at a horizon `H` past the window. Truncating at `H` leaves
//! `z_n` short by `P_n (z_H - 1)` with `P_n = alpha_{n+1} ... alpha_H`, so the
//! horizon is grown until `max_n P_n / (1 - beta)` is below the tolerance,
//! `beta` being the realised geometric-mean contraction of the sites used.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env_model::{Environment, EnvironmentModel};
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, domain, walk_rng};

/// Knobs for [`compute_rho_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoOptions {
    pub tol: f64,
    /// Extra sites past `N` kept in the profile (read by the cluster scan).
    pub lookahead: usize,
    /// First horizon tried, in sites past the stored range.
    pub initial_horizon: usize,
    /// Largest horizon before giving up.
    pub max_horizon: usize,
}

impl Default for RhoOptions {
    fn default() -> Self {
        RhoOptions { tol: 1e-10, lookahead: 0, initial_horizon: 64, max_horizon: 1 << 26 }
    }
}

/// `rho_n` and `z_n` on `[0, N + lookahead)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoProfile {
    pub n: usize,
    pub lookahead: usize,
    pub horizon: usize,
    pub err_bound: f64,
    pub tol: f64,
    pub p: Vec<f64>,
    pub z: Vec<f64>,
    pub rho: Vec<f64>,
}

impl RhoProfile {
    /// `rho` on the window `[0, N)` only.
    pub fn window(&self) -> &[f64] {
        &self.rho[..self.n]
    }

    /// Quenched mean of `T_N`: `sum_{n<N} rho_n`.
    pub fn total(&self) -> f64 {
        self.window().iter().sum()
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Write `(n, p_n, rho_n)` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "p_n", "rho_n"])?;
        for (i, (p, r)) in self.p.iter().zip(&self.rho).enumerate() {
            w.write_record([i.to_string(), p.to_string(), r.to_string()])?;
        }
        w.flush()
    }
}

pub fn compute_rho(env: &Environment, n: usize, tol: f64) -> Result<RhoProfile> {
    compute_rho_with(env, n, &RhoOptions { tol, ..RhoOptions::default() })
}

pub fn compute_rho_with(env: &Environment, n: usize, opts: &RhoOptions) -> Result<RhoProfile> {
    compute_rho_at(env, 0, n, opts)
}

/// Like [`compute_rho_with`] for the window `[start, start + n)`; entry `i`
/// of the profile is site `start + i`.
pub fn compute_rho_at(env: &Environment, start: i64, n: usize, opts: &RhoOptions) -> Result<RhoProfile> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty window".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol = {} must be positive", opts.tol)));
    }
    let stored = n + opts.lookahead;
    let mut extra = opts.initial_horizon.max(1);
    loop {
        let hi = start + (stored + extra) as i64;
        let p = match env.p_range(start, hi) {
            Ok(p) => p,
            // A synthetic environment ends where it ends: use all of it.
            Err(Error::WindowTooSmall(_)) if env.end() > start + stored as i64 && env.offset() <= start => {
                let p = env.p_range(start, env.end())?;
                return finish(p, n, opts, true);
            }
            Err(e) => return Err(e),
        };
        match finish(p, n, opts, false) {
            Err(Error::HorizonExhausted(_)) if extra < opts.max_horizon => {
                extra = (extra * 2).min(opts.max_horizon);
            }
            other => return other,
        }
    }
}

/// Run the recursion over `p` (sites `0..p.len()`), with the stored range
/// `[0, n + lookahead)`. `last_try` accepts whatever bound results.
fn finish(p: Vec<f64>, n: usize, opts: &RhoOptions, last_try: bool) -> Result<RhoProfile> {
    let stored = n + opts.lookahead;
    let total = p.len();
    let horizon = total - 1;
    let mut z = vec![0.0; total];
    z[horizon] = 1.0;
    let mut prod = 1.0f64;
    let mut max_prod = 0.0f64;
    let mut log_sum = 0.0;
    for i in (0..horizon).rev() {
        let a = (1.0 - p[i + 1]) / p[i + 1];
        log_sum += if a > 0.0 { a.ln() } else { -745.0 };
        z[i] = 1.0 + a * z[i + 1];
        prod *= a;
        if i < stored {
            max_prod = max_prod.max(prod);
        }
        if !z[i].is_finite() {
            return Err(Error::HorizonExhausted(format!("z overflowed at site {i}")));
        }
    }
    let beta = (log_sum / horizon as f64).exp();
    let err_bound = if beta < 1.0 { max_prod / (1.0 - beta) } else { f64::INFINITY };
    if err_bound > opts.tol && !last_try {
        return Err(Error::HorizonExhausted(format!(
            "bound {err_bound:.3e} above tol {:.3e} with {} extra sites",
            opts.tol,
            total - stored
        )));
    }
    if last_try && err_bound > opts.tol {
        log::warn!("environment too short for tol {:.3e}; bound {err_bound:.3e}", opts.tol);
    }
    z.truncate(stored);
    let mut p = p;
    p.truncate(stored);
    let rho = z.iter().zip(&p).map(|(z, p)| z / p).collect();
    Ok(RhoProfile { n, lookahead: opts.lookahead, horizon: total - stored, err_bound, tol: opts.tol, p, z, rho })
}

/// `(A, B)` with `A = alpha_{n-1} ... alpha_{n-k+1}` and
/// `B = 1 + alpha_{n-k+1} + ... + alpha_{n-k+1} ... alpha_{n-1}` (k terms),
/// so that `z_{n-k} = B + A alpha_n z_n` and hence
/// `rho_{n-k} <= (A rho_n + B) / eps0`.
pub fn coupling_diagnostics(env: &Environment, n: i64, k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let lo = n - k as i64 + 1;
    if lo < env.offset() || n > env.end() {
        return Err(Error::WindowTooSmall(format!("sites {lo}..{n} not in the environment")));
    }
    let mut a = 1.0;
    let mut b = 0.0;
    for j in lo..n {
        b += a;
        a *= env.alpha(j);
    }
    b += a;
    // The last term added to B is the full product, which is A itself.
    Ok((a, b))
}

/// Level grid of tail-constant estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub s: f64,
    pub levels: Vec<f64>,
    /// `x^s P(z > x)`.
    pub c_hat: Vec<f64>,
    /// `x^s P(rho > x)`.
    pub c_star_hat: Vec<f64>,
    pub exceed_z: Vec<usize>,
    pub exceed_rho: Vec<usize>,
    pub n_samples: usize,
    /// Level at or below the sample median of `z`.
    pub pre_asymptotic: Vec<bool>,
    /// Monte Carlo `E[p^{-s}]` from the same draws.
    pub mean_p_pow: f64,
}

impl TailEstimate {
    /// `c_star_hat / c_hat` per level.
    pub fn ratios(&self) -> Vec<f64> {
        self.c_star_hat.iter().zip(&self.c_hat).map(|(a, b)| a / b).collect()
    }

    /// `max / min` of `c_hat` over the levels not flagged pre-asymptotic.
    pub fn flatness(&self) -> f64 {
        let vals: Vec<f64> =
            self.c_hat.iter().zip(&self.pre_asymptotic).filter(|(_, &f)| !f).map(|(c, _)| *c).collect();
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "c_hat", "c_star_hat"])?;
        for i in 0..self.levels.len() {
            w.write_record([self.levels[i].to_string(), self.c_hat[i].to_string(), self.c_star_hat[i].to_string()])?;
        }
        w.flush()
    }
}

/// One stationary draw of `(p_0, z_0)`: `z_0 = 1 + alpha_1 + alpha_1 alpha_2 + ...`
/// summed until the running product is negligible.
pub fn sample_stationary_z<R: RngCore + ?Sized>(model: &EnvironmentModel, rng: &mut R) -> (f64, f64) {
    let p0 = model.sample_p(rng);
    let mut sum = 1.0;
    let mut prod = 1.0;
    loop {
        let p = model.sample_p(rng);
        prod *= (1.0 - p) / p;
        sum += prod;
        if prod < 1e-14 * sum {
            return (p0, sum);
        }
    }
}

const TAIL_CHUNK: usize = 1 << 14;

/// Stationary draws of `(p_0, z_0)`, deterministic in `seed` and independent
/// of the thread count.
pub fn sample_z(model: &EnvironmentModel, n_samples: usize, seed: u64) -> Vec<(f64, f64)> {
    let chunks = n_samples.div_ceil(TAIL_CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = walk_rng(derive_seed(seed, domain::SAMPLER, c as u64));
            let len = TAIL_CHUNK.min(n_samples - c * TAIL_CHUNK);
            (0..len).map(move |_| sample_stationary_z(model, &mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

pub fn estimate_tail_constants(
    model: &EnvironmentModel,
    s: f64,
    levels: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<TailEstimate> {
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) || levels[0] <= 0.0 {
        return Err(Error::InvalidArgument("levels must be positive and strictly increasing".into()));
    }
    let draws = sample_z(model, n_samples, seed);
    tail_from_draws(&draws, s, levels)
}

/// Level-grid estimates from existing `(p, z)` draws.
pub fn tail_from_draws(draws: &[(f64, f64)], s: f64, levels: &[f64]) -> Result<TailEstimate> {
    let n = draws.len();
    if n == 0 {
        return Err(Error::InsufficientData("no draws".into()));
    }
    let mut zs: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let mut rhos: Vec<f64> = draws.iter().map(|d| d.1 / d.0).collect();
    zs.sort_by(f64::total_cmp);
    rhos.sort_by(f64::total_cmp);
    let median = zs[n / 2];
    let above = |v: &[f64], x: f64| v.len() - v.partition_point(|&y| y <= x);
    let exceed_z: Vec<usize> = levels.iter().map(|&x| above(&zs, x)).collect();
    let exceed_rho: Vec<usize> = levels.iter().map(|&x| above(&rhos, x)).collect();
    let top = *exceed_z.last().expect("nonempty");
    if top < 50 {
        return Err(Error::InsufficientExceedances { found: top, needed: 50 });
    }
    let scale = |x: f64, k: usize| x.powf(s) * k as f64 / n as f64;
    Ok(TailEstimate {
        s,
        levels: levels.to_vec(),
        c_hat: levels.iter().zip(&exceed_z).map(|(&x, &k)| scale(x, k)).collect(),
        c_star_hat: levels.iter().zip(&exceed_rho).map(|(&x, &k)| scale(x, k)).collect(),
        exceed_z,
        exceed_rho,
        n_samples: n,
        pre_asymptotic: levels.iter().map(|&x| x <= median).collect(),
        mean_p_pow: draws.iter().map(|d| d.0.powf(-s)).sum::<f64>() / n as f64,
    })
}

/// `count` log-spaced levels between `lo` and `hi`.
pub fn log_levels(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_model::sample_environment;
    use proptest::prelude::*;
    use rand::RngCore;

    #[test]
    fn constant_two_thirds_gives_three() {
        let m = EnvironmentModel::constant(2.0 / 3.0).unwrap();
        let env = sample_environment(&m, 0, 1000, 1).unwrap();
        let prof = compute_rho(&env, 1000, 1e-10).unwrap();
        assert!(prof.err_bound <= 1e-10);
        for (i, r) in prof.window().iter().enumerate() {
            assert!((r - 3.0).abs() <= 1e-9, "site {i}: {r}");
            assert!((r - 3.0).abs() <= prof.err_bound * 1.5 + 1e-15);
        }
    }

    #[test]
    fn constant_eps0_closed_form() {
        let m = EnvironmentModel::constant(0.8).unwrap();
        let env = sample_environment(&m, 0, 100, 1).unwrap();
        let prof = compute_rho(&env, 100, 1e-12).unwrap();
        for (z, r) in prof.z.iter().zip(prof.window()) {
            assert!((z - 4.0 / 3.0).abs() < 1e-11);
            assert!((r - 5.0 / 3.0).abs() < 1e-11);
        }
    }

    #[test]
    fn two_tolerances_agree() {
        let m = EnvironmentModel::two_point_alpha(2.0, 0.25, 0.5, None).unwrap();
        for seed in 0..20 {
            let env = sample_environment(&m, 0, 2000, seed).unwrap();
            let a = compute_rho(&env, 2000, 1e-8).unwrap();
            let b = compute_rho(&env, 2000, 1e-9).unwrap();
            for (x, y) in a.z.iter().zip(&b.z) {
                assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn coupling_examples() {
        let env = Environment::from_values(0, vec![2.0 / 3.0; 10]).unwrap();
        assert_eq!(coupling_diagnostics(&env, 5, 1).unwrap(), (1.0, 1.0));
        let (a, b) = coupling_diagnostics(&env, 5, 4).unwrap();
        assert!((a - 0.125).abs() < 1e-15);
        assert!((b - 15.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn coupling_inequality_on_random_sites() {
        let m = EnvironmentModel::two_point_alpha(2.0, 0.25, 0.5, None).unwrap();
        let eps0 = m.eps0();
        let mut rng = walk_rng(3);
        let mut checked = 0;
        for e in 0..100 {
            let env = sample_environment(&m, 0, 400, e).unwrap();
            let prof = compute_rho(&env, 400, 1e-12).unwrap();
            for _ in 0..100 {
                let k = 1 + (rng.next_u64() % 30) as usize;
                let n = k as i64 + (rng.next_u64() % (399 - k as u64)) as i64;
                let (a, b) = coupling_diagnostics(&env, n, k).unwrap();
                let lhs = prof.rho[(n - k as i64) as usize];
                let rhs = (a * prof.rho[n as usize] + b) / eps0;
                assert!(lhs <= rhs * (1.0 + 1e-12), "n={n} k={k}: {lhs} > {rhs}");
                checked += 1;
            }
        }
        assert_eq!(checked, 10_000);
    }

    #[test]
    fn tail_estimate_flags_and_errors() {
        let m = EnvironmentModel::two_point_alpha(2.0, 1.0 / 3.0, 0.5, None).unwrap();
        let s = m.tail_index().unwrap();
        let est = estimate_tail_constants(&m, s, &[0.5, 200.0, 1000.0], 20_000, 1).unwrap();
        assert_eq!(est.pre_asymptotic, vec![true, false, false], "{est:?}");
        assert!(est.c_hat.iter().all(|&c| c >= 0.0));
        assert!(matches!(estimate_tail_constants(&m, s, &[1e9], 1000, 1), Err(Error::InsufficientExceedances { .. })));
        assert!(estimate_tail_constants(&m, s, &[2.0, 1.0], 10, 1).is_err());
    }

    #[test]
    fn synthetic_window_is_used_whole() {
        let env = Environment::from_values(0, vec![1.0; 20]).unwrap();
        let prof = compute_rho(&env, 10, 1e-10).unwrap();
        assert!(prof.window().iter().all(|&r| r == 1.0));
    }

    proptest! {
        #[test]
        fn recursion_identity_and_bounds(seed in 0u64..1000, n in 10usize..300) {
            let m = EnvironmentModel::two_point(0.3, 0.8, 0.4, None).unwrap();
            let env = sample_environment(&m, 0, n as i64, seed).unwrap();
            let prof = compute_rho_with(&env, n, &RhoOptions { tol: 1e-9, lookahead: 5, ..Default::default() }).unwrap();
            prop_assert!(prof.err_bound <= 1e-9);
            for i in 0..prof.len() - 1 {
                let a = (1.0 - prof.p[i + 1]) / prof.p[i + 1];
                let resid = prof.z[i] - 1.0 - a * prof.z[i + 1];
                prop_assert!(resid.abs() <= 1e-12 * prof.z[i]);
                prop_assert!(prof.rho[i] >= 1.0);
                prop_assert_eq!(prof.rho[i], prof.z[i] / prof.p[i]);
            }
        }

        #[test]
        fn halving_tol_never_loosens(seed in 0u64..200, k in 4i32..12) {
            let m = EnvironmentModel::two_point_alpha(2.0, 0.25, 0.5, None).unwrap();
            let env = sample_environment(&m, 0, 200, seed).unwrap();
            let tol = 10f64.powi(-k);
            let a = compute_rho(&env, 200, tol).unwrap();
            let b = compute_rho(&env, 200, tol / 2.0).unwrap();
            prop_assert!(b.err_bound <= a.err_bound);
            prop_assert!(a.err_bound <= tol);
        }
    }
}
