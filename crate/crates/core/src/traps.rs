//! Massive sites, marked sites and clusters of a profile.
//!
//! With threshold `h = delta N^{1/s}` a site is massive when `rho_n >= h`
//! and marked when it is massive and the next `M` sites are not. The
//! cluster of a marked site is `[n - M, n]`; its mass is the sum of `rho`
//! over the cluster.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env_model::{sample_environment, EnvironmentModel};
use crate::error::{Error, Result};
use crate::occupancy::{compute_rho_with, RhoOptions, RhoProfile};
use crate::seeds::{derive_seed, domain};
use crate::walk::WalkOutcome;

/// `M = max(2, ceil(ln ln N))`.
pub fn cluster_span(n: usize) -> usize {
    let m = (n as f64).ln().ln().ceil();
    if m.is_finite() && m > 2.0 {
        m as usize
    } else {
        2
    }
}

/// `min_h E[alpha^h]` over `0 < h < s`, the per-site decay of the chance
/// that two massive sites sit a given distance apart.
pub fn separation_decay(model: &EnvironmentModel, s: f64) -> f64 {
    let f = |h: f64| model.log_mean_alpha_pow(h);
    let (mut a, mut b) = (0.0, s);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let (x1, x2) = (b - phi * (b - a), a + phi * (b - a));
        if f(x1) <= f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    f(0.5 * (a + b)).exp()
}

/// How the look-ahead `M` of the marking rule is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpanRule {
    /// [`cluster_span`].
    #[default]
    LnLn,
    /// Smallest `M` with `beta^M <= 1/N`, `beta` from [`separation_decay`].
    Separation,
    Fixed(usize),
}

impl SpanRule {
    pub fn span(self, model: &EnvironmentModel, s: f64, n: usize) -> usize {
        match self {
            SpanRule::LnLn => cluster_span(n),
            SpanRule::Separation => {
                let beta = separation_decay(model, s);
                let m = ((n as f64).ln() / -beta.ln()).ceil();
                if m.is_finite() && m >= 2.0 {
                    m as usize
                } else {
                    2
                }
            }
            SpanRule::Fixed(m) => m.max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub n: usize,
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub theta: f64,
    /// `xi_n / rho_n` once a walk is attached.
    pub gamma: Option<f64>,
    /// The cluster reached below site 0 and was cut there.
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedProcessSample {
    pub n: usize,
    pub s: f64,
    pub delta: f64,
    pub span: usize,
    pub threshold: f64,
    pub clusters: Vec<ClusterRecord>,
    /// Massive sites lying in no cluster.
    pub orphans: Vec<usize>,
    pub massive: usize,
}

impl MarkedProcessSample {
    pub fn thetas(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.theta).collect()
    }

    /// `sum theta_j Gamma_j` over clusters with marks attached.
    pub fn marked_sum(&self) -> f64 {
        self.clusters.iter().map(|c| c.theta * c.gamma.unwrap_or(0.0)).sum()
    }
}

pub fn detect_clusters(profile: &RhoProfile, s: f64, delta: f64) -> Result<MarkedProcessSample> {
    detect_clusters_with(profile, s, delta, cluster_span(profile.n))
}

/// [`detect_clusters`] with an explicit look-ahead `span` in place of `M`.
pub fn detect_clusters_with(profile: &RhoProfile, s: f64, delta: f64, span: usize) -> Result<MarkedProcessSample> {
    let n = profile.n;
    if span == 0 {
        return Err(Error::InvalidArgument("span must be positive".into()));
    }
    if !(delta > 0.0) || !(s > 0.0) {
        return Err(Error::InvalidArgument("delta and s must be positive".into()));
    }
    if n < 16 {
        return Err(Error::InvalidArgument(format!("N = {n} < 16")));
    }
    if profile.len() < n + span {
        return Err(Error::WindowTooSmall(format!(
            "marking needs {span} sites past N; profile has {}",
            profile.len() - n
        )));
    }
    let scale = (n as f64).powf(1.0 / s);
    let threshold = delta * scale;
    let rho = &profile.rho;
    let mut clusters = Vec::new();
    let mut covered = vec![false; n];
    let mut massive = 0;
    // Distance to the nearest massive site on the right, scanning leftwards.
    let mut next_massive = usize::MAX;
    for i in (n..n + span).rev() {
        if rho[i] >= threshold {
            next_massive = i;
        }
    }
    for i in (0..n).rev() {
        if rho[i] < threshold {
            continue;
        }
        massive += 1;
        if next_massive > i + span {
            let first = i.saturating_sub(span);
            let m: f64 = rho[first..=i].iter().sum();
            for c in covered[first..=i].iter_mut() {
                *c = true;
            }
            clusters.push(ClusterRecord {
                n: i,
                t: i as f64 / n as f64,
                a: rho[i] / threshold,
                b: m / rho[i],
                m,
                theta: m / scale,
                gamma: None,
                clipped: i < span,
            });
        }
        next_massive = i;
    }
    clusters.reverse();
    let orphans = (0..n).filter(|&i| rho[i] >= threshold && !covered[i]).collect();
    Ok(MarkedProcessSample { n, s, delta, span, threshold, clusters, orphans, massive })
}

/// `b = (rho_{i-span} + ... + rho_i) / rho_i` at every massive site `i` in
/// `[span, N)`, marked or not.
pub fn massive_b(profile: &RhoProfile, s: f64, delta: f64, span: usize) -> Result<Vec<f64>> {
    if !(delta > 0.0) || !(s > 0.0) {
        return Err(Error::InvalidArgument("delta and s must be positive".into()));
    }
    let n = profile.n.min(profile.len());
    let threshold = delta * (profile.n as f64).powf(1.0 / s);
    let rho = &profile.rho;
    Ok((span..n).filter(|&i| rho[i] >= threshold).map(|i| rho[i - span..=i].iter().sum::<f64>() / rho[i]).collect())
}

/// Attach `Gamma_j = xi_{n_j} / rho_{n_j}` from a walk on the same environment.
pub fn attach_marks(
    sample: &MarkedProcessSample,
    outcome: &WalkOutcome,
    profile: &RhoProfile,
) -> Result<MarkedProcessSample> {
    if outcome.n != sample.n || profile.n != sample.n {
        return Err(Error::InvalidArgument("walk, profile and sample disagree on N".into()));
    }
    let mut out = sample.clone();
    for c in out.clusters.iter_mut() {
        c.gamma = Some(outcome.xi[c.n] as f64 / profile.rho[c.n]);
    }
    Ok(out)
}

/// Profile options with room for a look-ahead of `span` sites.
pub fn cluster_profile_options(span: usize, tol: f64) -> RhoOptions {
    RhoOptions { tol, lookahead: span, ..RhoOptions::default() }
}

/// Per-environment summary of a point-process sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvClusters {
    pub env_index: usize,
    pub env_seed: u64,
    /// One sample per entry of the δ ladder.
    pub samples: Vec<MarkedProcessSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub delta: f64,
    pub counts: Vec<u64>,
    pub lambda_hat: f64,
    /// Counts histogram, index = count.
    pub histogram: Vec<u64>,
    pub thetas: Vec<f64>,
    pub positions: Vec<f64>,
    pub orphans: u64,
}

/// Environment seeds used by sweeps.
pub fn env_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, domain::ENVIRONMENT, index as u64)
}

/// Detect clusters on `n_envs` fresh environments for every `delta`.
pub fn sweep_point_process(
    model: &EnvironmentModel,
    s: f64,
    deltas: &[f64],
    n: usize,
    n_envs: usize,
    rule: SpanRule,
    seed: u64,
) -> Result<Vec<EnvClusters>> {
    let span = rule.span(model, s, n);
    let opts = cluster_profile_options(span, 1e-8);
    let out: Result<Vec<EnvClusters>> = (0..n_envs)
        .into_par_iter()
        .map(|e| {
            let es = env_seed(seed, e);
            let env = sample_environment(model, 0, (n + opts.lookahead) as i64, es)?;
            let prof = compute_rho_with(&env, n, &opts)?;
            let samples =
                deltas.iter().map(|&d| detect_clusters_with(&prof, s, d, span)).collect::<Result<Vec<_>>>()?;
            Ok(EnvClusters { env_index: e, env_seed: es, samples })
        })
        .collect();
    let out = out?;
    let expected = out.iter().map(|e| e.samples.first().map_or(0, |s| s.clusters.len())).sum::<usize>() as f64
        / n_envs.max(1) as f64;
    if expected > 20.0 {
        log::warn!("mean cluster count {expected:.1} per environment; consider a larger delta");
    }
    Ok(out)
}

/// Aggregate the sweep for ladder entry `k`.
pub fn summarize_sweep(envs: &[EnvClusters], k: usize) -> SweepSummary {
    let counts: Vec<u64> = envs.iter().map(|e| e.samples[k].clusters.len() as u64).collect();
    let top = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut histogram = vec![0u64; top + 1];
    for &c in &counts {
        histogram[c as usize] += 1;
    }
    SweepSummary {
        delta: envs.first().map_or(f64::NAN, |e| e.samples[k].delta),
        lambda_hat: counts.iter().sum::<u64>() as f64 / counts.len().max(1) as f64,
        counts,
        histogram,
        thetas: envs.iter().flat_map(|e| e.samples[k].thetas()).collect(),
        positions: envs.iter().flat_map(|e| e.samples[k].clusters.iter().map(|c| c.t)).collect(),
        orphans: envs.iter().map(|e| e.samples[k].orphans.len() as u64).sum(),
    }
}

/// One row of the cluster export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub env_seed: u64,
    pub n: usize,
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub m: f64,
    pub theta: f64,
    pub gamma: Option<f64>,
    pub clipped: bool,
}

impl ClusterRow {
    pub fn new(env_seed: u64, c: &ClusterRecord) -> Self {
        ClusterRow {
            env_seed,
            n: c.n,
            t: c.t,
            a: c.a,
            b: c.b,
            m: c.m,
            theta: c.theta,
            gamma: c.gamma,
            clipped: c.clipped,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile(rho: Vec<f64>, n: usize) -> RhoProfile {
        RhoProfile {
            n,
            lookahead: rho.len() - n,
            horizon: 0,
            err_bound: 0.0,
            tol: 0.0,
            p: vec![0.5; rho.len()],
            z: rho.iter().map(|r| r / 2.0).collect(),
            rho,
        }
    }

    /// The definition, read literally.
    fn brute(rho: &[f64], n: usize, h: f64, m: usize) -> (Vec<usize>, Vec<usize>) {
        let marked: Vec<usize> = (0..n).filter(|&i| rho[i] >= h && (1..=m).all(|j| rho[i + j] < h)).collect();
        let orphans = (0..n).filter(|&i| rho[i] >= h && !marked.iter().any(|&k| i + m >= k && i <= k)).collect();
        (marked, orphans)
    }

    #[test]
    fn span_values() {
        assert_eq!(cluster_span(16), 2);
        assert_eq!(cluster_span(100_000), 3);
        assert_eq!(cluster_span(1_000_000), 3);
        assert_eq!(cluster_span(10_000_000), 3);
    }

    #[test]
    fn constant_profile_has_no_clusters() {
        let p = profile(vec![3.0; 110], 100);
        let s = detect_clusters(&p, 0.7, 1.0).unwrap();
        assert!(s.clusters.is_empty() && s.orphans.is_empty() && s.massive == 0);
    }

    #[test]
    fn single_spike() {
        let n = 1000;
        let s = 0.7;
        let h = 0.5 * (n as f64).powf(1.0 / s);
        let mut rho = vec![2.0; n + 10];
        rho[400] = 10.0 * h;
        let sample = detect_clusters(&profile(rho, n), s, 0.5).unwrap();
        assert_eq!(sample.clusters.len(), 1);
        let c = &sample.clusters[0];
        assert_eq!(c.n, 400);
        assert!((c.a - 10.0).abs() < 1e-12);
        let m = 10.0 * h + 2.0 * sample.span as f64;
        assert!((c.b - m / (10.0 * h)).abs() < 1e-12);
        assert!((c.m - 0.5 * (n as f64).powf(1.0 / s) * c.a * c.b).abs() < 1e-9 * c.m);
        let b = massive_b(&profile(vec![2.0; n + 10], n), s, 0.5, sample.span).unwrap();
        assert!(b.is_empty());
        let mut rho = vec![2.0; n + 10];
        rho[400] = 10.0 * h;
        assert_eq!(massive_b(&profile(rho, n), s, 0.5, sample.span).unwrap(), vec![c.b]);
    }

    #[test]
    fn neighbours_within_span() {
        let n = 100;
        let h = 100.0;
        let mut rho = vec![1.0; n + 5];
        rho[50] = 2.0 * h;
        rho[52] = 3.0 * h;
        let sample = detect_clusters(&profile(rho.clone(), n), 1.0, 1.0).unwrap();
        assert_eq!(sample.clusters.iter().map(|c| c.n).collect::<Vec<_>>(), vec![52]);
        assert!(sample.orphans.is_empty());
        rho[52] = 1.0;
        rho[53] = 3.0 * h;
        let sample = detect_clusters(&profile(rho.clone(), n), 1.0, 1.0).unwrap();
        let (marked, orphans) = brute(&rho, n, h, sample.span);
        assert_eq!(sample.clusters.iter().map(|c| c.n).collect::<Vec<_>>(), marked);
        assert_eq!(sample.orphans, orphans);
    }

    #[test]
    fn clipping_at_left_edge() {
        let n = 100;
        let mut rho = vec![1.0; n + 5];
        rho[1] = 1000.0;
        let sample = detect_clusters(&profile(rho, n), 1.0, 1.0).unwrap();
        assert!(sample.clusters[0].clipped);
        assert_eq!(sample.clusters[0].m, 1001.0);
    }

    #[test]
    fn short_lookahead_is_rejected() {
        assert!(matches!(detect_clusters(&profile(vec![1.0; 100], 100), 1.0, 1.0), Err(Error::WindowTooSmall(_))));
    }

    proptest! {
        #[test]
        fn matches_brute_force(spikes in proptest::collection::vec((0usize..64, 1.0f64..5.0), 0..20)) {
            let n = 60;
            let h = 60.0;
            let mut rho = vec![1.5; n + 4];
            for (i, f) in spikes {
                rho[i] = f * h;
            }
            let sample = detect_clusters(&profile(rho.clone(), n), 1.0, 1.0).unwrap();
            let (marked, orphans) = brute(&rho, n, h, sample.span);
            prop_assert_eq!(sample.clusters.iter().map(|c| c.n).collect::<Vec<_>>(), marked);
            prop_assert_eq!(&sample.orphans, &orphans);
            for w in sample.clusters.windows(2) {
                prop_assert!(w[1].n - w[0].n > sample.span);
            }
            for c in &sample.clusters {
                prop_assert!(c.a >= 1.0 && c.b >= 1.0);
            }
        }
    }
}
