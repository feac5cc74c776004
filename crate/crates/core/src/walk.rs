//! Quenched trajectories: a direct stepper and an exact crossing sampler.
//!
//! Both report the occupation counts `xi_n` on `[0, N]` accumulated until
//! the walk first reaches `N + B`, the hitting time of `N`, the occupation
//! time `T_N` of `[0, N)` and the maximum `xi*` over `[0, N]`.
//!
//! The crossing sampler works on edge crossings. Let `D_n` be the number of
//! steps `n + 1 -> n` made before the walk stops. Every departure from a
//! site is an independent right step with probability `p_n`, and the last
//! departure from any visited site is to the right, so given the number of
//! right steps `U_n` out of `n`, `D_{n-1}` is negative binomial: the number
//! of failures before `U_n` successes. Right of the start, `U_n = D_n + 1`;
//! left of it, `U_n = D_n`. Each site is visited `U_n + D_{n-1}` times.

use rand::RngCore;
use rand_distr::{Distribution, Exp1, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env_model::Environment;
use crate::error::{Error, Result};
use crate::occupancy::{compute_rho_at, RhoOptions, RhoProfile};
use crate::seeds::{derive_seed, domain, walk_rng, WalkRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkOptions {
    /// Trajectories longer than this are discarded with `StepBudgetExceeded`.
    pub step_budget: u64,
    /// Target for the probability of coming back to `N - 1` from `N + B`.
    pub return_tol: f64,
    pub max_buffer: usize,
    /// Sites below 0 prepared up front; deeper excursions fetch more lazily.
    pub left_initial: usize,
}

impl Default for WalkOptions {
    fn default() -> Self {
        WalkOptions { step_budget: 1_000_000_000, return_tol: 1e-6, max_buffer: 1 << 20, left_initial: 256 }
    }
}

/// Right buffer past `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Buffer {
    pub size: usize,
    /// Exact quenched probability of reaching `N - 1` from `N + size`.
    pub return_prob: f64,
    /// The doubling stopped at `max_buffer` before reaching the target.
    pub capped: bool,
}

/// `ln P_x(hit y)` for `y < x`, from `z` on the sites `y..=x`.
fn log_return_probability(prof: &RhoProfile, first: usize, last: usize) -> f64 {
    let mut acc = 0.0;
    for j in first + 1..=last {
        let p = prof.p[j];
        acc += ((1.0 - p) / p).ln();
    }
    acc + prof.z[last].ln() - prof.z[first].ln()
}

/// `B = max(50, 10 ln N)` doubled until the walk at `N + B` returns to
/// `N - 1` with probability below `opts.return_tol`.
pub fn calibrate_buffer(env: &Environment, n: usize, opts: &WalkOptions) -> Result<Buffer> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let mut b = 50usize.max((10.0 * (n as f64).ln()).ceil() as usize).min(opts.max_buffer);
    loop {
        let prof = compute_rho_at(env, n as i64 - 1, b + 2, &RhoOptions { tol: 1e-12, ..RhoOptions::default() })?;
        let lp = log_return_probability(&prof, 0, b + 1);
        let prob = lp.exp();
        if prob < opts.return_tol {
            return Ok(Buffer { size: b, return_prob: prob, capped: false });
        }
        if b >= opts.max_buffer {
            log::warn!("buffer capped at {b} sites with return probability {prob:.3e}");
            return Ok(Buffer { size: b, return_prob: prob, capped: true });
        }
        b = (b * 2).min(opts.max_buffer);
    }
}

/// One trajectory's occupation statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkOutcome {
    pub n: usize,
    /// Visits to sites `0..=N` (the last entry is site `N`).
    pub xi: Vec<u64>,
    pub t_n: u64,
    pub t_tilde: u64,
    pub xi_star: u64,
    pub truncated: bool,
}

impl WalkOutcome {
    fn from_counts(n: usize, xi: Vec<u64>, t_tilde: u64, truncated: bool) -> Self {
        let t_n = xi[..n].iter().sum();
        let xi_star = *xi.iter().max().expect("nonempty");
        WalkOutcome { n, xi, t_n, t_tilde, xi_star, truncated }
    }

    /// Counts on `[0, N)`.
    pub fn window(&self) -> &[u64] {
        &self.xi[..self.n]
    }
}

/// Which trajectory generator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    Direct,
    #[default]
    Crossings,
}

/// Per-environment tables shared by all replicas.
#[derive(Debug, Clone)]
pub struct WalkSetup {
    env: Environment,
    n: usize,
    buffer: Buffer,
    lo: i64,
    p: Vec<f64>,
    thr: Vec<u64>,
    /// `1 / -ln q`, infinite-free: zero where `q = 0`.
    geo_scale: Vec<f64>,
    opts: WalkOptions,
}

#[inline]
fn threshold(p: f64) -> u64 {
    // Saturating cast: p = 1 maps to u64::MAX.
    (p * 18_446_744_073_709_551_616.0) as u64
}

#[inline]
fn geo_scale(p: f64) -> f64 {
    let q = 1.0 - p;
    if q <= 0.0 {
        0.0
    } else {
        -1.0 / q.ln()
    }
}

/// Lazily fetched sites below the prepared window, nearest first.
struct LeftSites {
    p: Vec<f64>,
}

impl WalkSetup {
    pub fn new(env: &Environment, n: usize, opts: WalkOptions) -> Result<Self> {
        let buffer = calibrate_buffer(env, n, &opts)?;
        Self::with_buffer(env, n, buffer, opts)
    }

    pub fn with_buffer(env: &Environment, n: usize, buffer: Buffer, opts: WalkOptions) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("N must be positive".into()));
        }
        let mut lo = -(opts.left_initial as i64);
        if env.model().is_none() {
            lo = lo.max(env.offset());
        }
        if lo > 0 {
            return Err(Error::WindowTooSmall("environment starts right of 0".into()));
        }
        let end = (n + buffer.size) as i64;
        let p = env.p_range(lo, end + 1)?;
        let thr = p.iter().map(|&v| threshold(v)).collect();
        let geo = p.iter().map(|&v| geo_scale(v)).collect();
        Ok(WalkSetup { env: env.clone(), n, buffer, lo, p, thr, geo_scale: geo, opts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn buffer(&self) -> Buffer {
        self.buffer
    }

    pub fn options(&self) -> &WalkOptions {
        &self.opts
    }

    fn left_p(&self, site: i64, left: &mut LeftSites) -> Result<f64> {
        let k = (self.lo - 1 - site) as usize;
        if k >= left.p.len() {
            let have = left.p.len() as i64;
            let want = ((k + 1).max(2 * left.p.len()).max(256)) as i64;
            let from = self.lo - want;
            let to = self.lo - have;
            let fresh = self.env.p_range(from, to)?;
            left.p.extend(fresh.iter().rev());
        }
        Ok(left.p[k])
    }

    pub fn run(&self, sampler: Sampler, seed: u64) -> Result<WalkOutcome> {
        match sampler {
            Sampler::Direct => self.simulate_walk(seed),
            Sampler::Crossings => self.simulate_crossings_fast(seed),
        }
    }

    /// Step the walk from 0 until it first reaches `N + B`.
    pub fn simulate_walk(&self, seed: u64) -> Result<WalkOutcome> {
        let mut rng = walk_rng(seed);
        let n = self.n as i64;
        let end = n + self.buffer.size as i64;
        let lo = self.lo;
        let budget = self.opts.step_budget;
        let mut counts = vec![0u64; (end - lo) as usize];
        let mut left = LeftSites { p: Vec::new() };
        let mut pos = 0i64;
        let mut steps = 0u64;
        let mut t_tilde = None;
        while pos != end {
            let t = if pos >= lo {
                let i = (pos - lo) as usize;
                counts[i] += 1;
                self.thr[i]
            } else {
                threshold(self.left_p(pos, &mut left)?)
            };
            if pos == n && t_tilde.is_none() {
                t_tilde = Some(steps);
            }
            pos += if rng.next_u64() < t { 1 } else { -1 };
            steps += 1;
            if steps > budget {
                return Err(Error::StepBudgetExceeded { budget });
            }
        }
        let first = (-lo) as usize;
        let xi = counts[first..first + self.n + 1].to_vec();
        Ok(WalkOutcome::from_counts(self.n, xi, t_tilde.expect("N is passed before N + B"), self.buffer.capped))
    }

    #[inline]
    fn nb<R: RngCore>(&self, k: u64, p: f64, scale: f64, rng: &mut R) -> u64 {
        if k == 0 || scale == 0.0 {
            return 0;
        }
        let q = 1.0 - p;
        let kf = k as f64;
        if k <= 16 && q >= p {
            let mut acc = 0u64;
            for _ in 0..k {
                let e: f64 = Exp1.sample(rng);
                acc += (e * scale) as u64;
            }
            acc
        } else if kf * q <= 30.0 * p {
            // Sequential inversion: P(0) = p^k, P(j+1) = P(j) q (k+j)/(j+1).
            let u = crate::seeds::unit_f64(rng.next_u64());
            let mut pmf = p.powi(k as i32);
            let mut cdf = pmf;
            let mut j = 0u64;
            while u >= cdf && j < 10_000 {
                pmf *= q * (kf + j as f64) / (j + 1) as f64;
                cdf += pmf;
                j += 1;
            }
            j
        } else {
            let lambda = Gamma::new(kf, q / p).expect("valid gamma").sample(rng);
            if lambda <= 0.0 {
                return 0;
            }
            Poisson::new(lambda).map(|d| d.sample(rng) as u64).unwrap_or(0)
        }
    }

    fn nb_site(&self, k: u64, site: i64, left: &mut LeftSites, rng: &mut WalkRng) -> Result<u64> {
        if k == 0 {
            return Ok(0);
        }
        if site >= self.lo {
            let i = (site - self.lo) as usize;
            Ok(self.nb(k, self.p[i], self.geo_scale[i], rng))
        } else {
            let p = self.left_p(site, left)?;
            Ok(self.nb(k, p, geo_scale(p), rng))
        }
    }

    /// Exact sampler of the same law through edge crossings.
    pub fn simulate_crossings_fast(&self, seed: u64) -> Result<WalkOutcome> {
        let mut rng = walk_rng(seed);
        let n = self.n as i64;
        let end = n + self.buffer.size as i64;
        let budget = self.opts.step_budget;
        let mut left = LeftSites { p: Vec::new() };
        let mut xi = vec![0u64; self.n + 1];

        // Up to the first visit of N.
        let mut d = 0u64;
        let mut sum_d = 0u64;
        for site in (0..n).rev() {
            let u = d + 1;
            let below = self.nb_site(u, site, &mut left, &mut rng)?;
            xi[site as usize] += u + below;
            sum_d += below;
            d = below;
        }
        let mut site = -1;
        while d > 0 {
            d = self.nb_site(d, site, &mut left, &mut rng)?;
            sum_d += d;
            site -= 1;
        }
        let t_tilde = n as u64 + 2 * sum_d;

        // From N until the first visit of N + B.
        let mut d = 0u64;
        let mut sum_d2 = 0u64;
        for site in (n..end).rev() {
            let u = d + 1;
            let below = self.nb_site(u, site, &mut left, &mut rng)?;
            if site == n {
                xi[self.n] += u + below;
            }
            sum_d2 += below;
            d = below;
        }
        let mut site = n - 1;
        while d > 0 {
            let below = self.nb_site(d, site, &mut left, &mut rng)?;
            if site >= 0 {
                xi[site as usize] += d + below;
            }
            sum_d2 += below;
            d = below;
            site -= 1;
        }
        let steps = t_tilde + self.buffer.size as u64 + 2 * sum_d2;
        if steps > budget {
            return Err(Error::StepBudgetExceeded { budget });
        }
        Ok(WalkOutcome::from_counts(self.n, xi, t_tilde, self.buffer.capped))
    }

    /// Run `replicas` independent walks and reduce each with `f`. Replica `r`
    /// uses the seed `derive_seed(seed, REPLICA, r)`, so results do not depend
    /// on the thread count. Walks over budget are counted and dropped.
    pub fn replicas<T, F>(&self, sampler: Sampler, replicas: usize, seed: u64, f: F) -> Result<ReplicaBatch<T>>
    where
        T: Send,
        F: Fn(usize, WalkOutcome) -> T + Sync,
    {
        let results: Vec<Result<Option<T>>> = (0..replicas)
            .into_par_iter()
            .map(|r| match self.run(sampler, derive_seed(seed, domain::REPLICA, r as u64)) {
                Ok(o) => Ok(Some(f(r, o))),
                Err(Error::StepBudgetExceeded { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect();
        let mut values = Vec::with_capacity(replicas);
        let mut discarded = 0;
        for r in results {
            match r? {
                Some(v) => values.push(v),
                None => discarded += 1,
            }
        }
        Ok(ReplicaBatch { values, discarded })
    }
}

/// Replica results plus the number of walks dropped for exceeding the budget.
#[derive(Debug, Clone)]
pub struct ReplicaBatch<T> {
    pub values: Vec<T>,
    pub discarded: usize,
}

/// Single-shot direct simulation (buffer calibrated here).
pub fn simulate_walk(env: &Environment, n: usize, seed: u64) -> Result<WalkOutcome> {
    WalkSetup::new(env, n, WalkOptions::default())?.simulate_walk(seed)
}

/// Single-shot crossing sampler (buffer calibrated here).
pub fn simulate_crossings_fast(env: &Environment, n: usize, seed: u64) -> Result<WalkOutcome> {
    WalkSetup::new(env, n, WalkOptions::default())?.simulate_crossings_fast(seed)
}

/// Scaling regime, set by the tail index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `0 < s < 1`.
    Sub,
    /// `s = 1`.
    Critical,
    /// `1 < s < 2`.
    Super,
    /// `s = 2`.
    Gaussian,
}

/// Distance within which `s` is taken to equal 1 or 2.
pub const REGIME_TOL: f64 = 0.02;

impl Regime {
    pub fn from_s(s: f64) -> Result<Regime> {
        if !(s > 0.0) {
            return Err(Error::RegimeMismatch(format!("s = {s} is not positive")));
        }
        Ok(if (s - 1.0).abs() <= REGIME_TOL {
            Regime::Critical
        } else if (s - 2.0).abs() <= REGIME_TOL {
            Regime::Gaussian
        } else if s < 1.0 {
            Regime::Sub
        } else if s < 2.0 {
            Regime::Super
        } else {
            return Err(Error::RegimeMismatch(format!("s = {s} > 2 is outside the studied regimes")));
        })
    }

    /// Fails unless `s` falls in this regime.
    pub fn check(self, s: f64) -> Result<()> {
        let auto = Regime::from_s(s)?;
        if auto != self {
            return Err(Error::RegimeMismatch(format!("s = {s:.4} belongs to {auto:?}, not {self:?}")));
        }
        Ok(())
    }

    /// Scale dividing the centred occupation time.
    pub fn scale(self, s: f64, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            Regime::Gaussian => (nf * nf.ln()).sqrt(),
            _ => nf.powf(1.0 / s),
        }
    }
}

/// Annealed inputs for the centring of the environment term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Centering {
    /// `E[T_N]` averaged over environments (`1 < s <= 2`).
    pub annealed_mean: Option<f64>,
    /// `u_N` for `s = 1`.
    pub u_n: Option<f64>,
}

/// Normalised occupation statistics and the constants used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedStatistics {
    pub regime: Regime,
    /// Normalised `T_N`.
    pub t: f64,
    /// Normalised quenched mean `E_omega T_N`; NaN when its centring is missing.
    pub u: f64,
    /// Quenched mean subtracted from `T_N` (0 when `s < 1`).
    pub center_t: f64,
    /// Annealed constant subtracted from the quenched mean.
    pub center_u: f64,
    pub scale_t: f64,
    pub scale_u: f64,
}

/// Normalise one outcome. A missing annealed centring leaves `u` as NaN;
/// [`normalize_strict`] turns that into an error.
pub fn normalize(
    t_n: f64,
    quenched_mean: f64,
    n: usize,
    s: f64,
    regime: Regime,
    centering: &Centering,
) -> Result<NormalizedStatistics> {
    regime.check(s)?;
    let scale_t = regime.scale(s, n);
    let (center_t, scale_u, center_u) = match regime {
        Regime::Sub => (0.0, scale_t, 0.0),
        Regime::Critical => (quenched_mean, n as f64, centering.u_n.unwrap_or(f64::NAN)),
        Regime::Super | Regime::Gaussian => (quenched_mean, scale_t, centering.annealed_mean.unwrap_or(f64::NAN)),
    };
    Ok(NormalizedStatistics {
        regime,
        t: (t_n - center_t) / scale_t,
        u: (quenched_mean - center_u) / scale_u,
        center_t,
        center_u,
        scale_t,
        scale_u,
    })
}

pub fn normalize_strict(
    t_n: f64,
    quenched_mean: f64,
    n: usize,
    s: f64,
    regime: Regime,
    centering: &Centering,
) -> Result<NormalizedStatistics> {
    match regime {
        Regime::Critical if centering.u_n.is_none() => return Err(Error::MissingCentering("u_N")),
        Regime::Super | Regime::Gaussian if centering.annealed_mean.is_none() => {
            return Err(Error::MissingCentering("annealed E[T_N]"))
        }
        _ => {}
    }
    normalize(t_n, quenched_mean, n, s, regime, centering)
}

/// Normalise against a profile of the same environment.
pub fn normalize_outcome(
    outcome: &WalkOutcome,
    profile: &RhoProfile,
    s: f64,
    regime: Regime,
    centering: &Centering,
) -> Result<NormalizedStatistics> {
    normalize(outcome.t_n as f64, profile.total(), outcome.n, s, regime, centering)
}

/// One row of an outcome batch export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub replica: usize,
    #[serde(rename = "T_N")]
    pub t_n: u64,
    #[serde(rename = "T_tilde_N")]
    pub t_tilde: u64,
    pub xi_star: u64,
    #[serde(rename = "t_N")]
    pub t_norm: f64,
    pub truncated: bool,
}
