//! Environment laws and sampled environments.
//!
//! A model is the law of the right-step probability `p` at one site.
//! Sites are i.i.d., so everything the walk needs is the one-site law,
//! its ellipticity bound `eps0` and the tail index `s` solving
//! `E[alpha^s] = 1` with `alpha = (1 - p) / p`.

use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate};
use crate::seeds::unit_f64;

/// Default tolerance for the cached tail index.
pub const TAIL_INDEX_TOL: f64 = 1e-12;
/// Upper end of the root bracket; larger indices are reported as no root.
pub const MAX_TAIL_INDEX: f64 = 64.0;

const BETA_TABLE_CELLS: usize = 4096;

/// Canonical parametrisation of a site law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// `p = p_a` with probability `w`, otherwise `p = p_b`.
    TwoPoint { p_a: f64, p_b: f64, w: f64 },
    /// Beta(a, b) rescaled onto `[eps0, 1 - eps0]`; requires `a, b >= 1`.
    ScaledBeta { a: f64, b: f64 },
}

/// Model block as written in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    TwoPoint {
        p_a: f64,
        p_b: f64,
        w: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps0: Option<f64>,
    },
    /// Two-point law given through `alpha = q / p`; `w = P(alpha = alpha_a)`.
    TwoPointAlpha {
        alpha_a: f64,
        alpha_b: f64,
        w: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps0: Option<f64>,
    },
    ScaledBeta {
        a: f64,
        b: f64,
        eps0: f64,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<EnvironmentModel> {
        match *self {
            ModelSpec::TwoPoint { p_a, p_b, w, eps0 } => EnvironmentModel::two_point(p_a, p_b, w, eps0),
            ModelSpec::TwoPointAlpha { alpha_a, alpha_b, w, eps0 } => {
                EnvironmentModel::two_point_alpha(alpha_a, alpha_b, w, eps0)
            }
            ModelSpec::ScaledBeta { a, b, eps0 } => EnvironmentModel::scaled_beta(a, b, eps0),
        }
    }
}

/// Non-fatal findings about a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelWarning {
    /// `ln alpha` is supported on a lattice (ratio of the two log-values is
    /// rational with the given small denominator).
    ArithmeticSupport { ratio: f64, numerator: i64, denominator: i64 },
}

#[derive(Debug)]
struct CdfTable {
    lo: f64,
    width: f64,
    cdf: Vec<f64>,
}

impl CdfTable {
    fn invert(&self, u: f64) -> f64 {
        let cells = self.cdf.len() - 1;
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, cells) - 1;
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        let frac = if c1 > c0 { ((u - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.5 };
        self.lo + self.width * (i as f64 + frac)
    }
}

/// Law of the i.i.d. site probabilities.
#[derive(Debug, Clone)]
pub struct EnvironmentModel {
    kind: ModelKind,
    eps0: f64,
    tail_index: std::result::Result<f64, Error>,
    warnings: Vec<ModelWarning>,
    beta_norm: f64,
    cdf: Option<Arc<CdfTable>>,
}

impl PartialEq for EnvironmentModel {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.eps0 == other.eps0
    }
}

impl EnvironmentModel {
    /// Two-point law. When `eps0` is omitted the largest admissible value is used.
    pub fn two_point(p_a: f64, p_b: f64, w: f64, eps0: Option<f64>) -> Result<Self> {
        for (name, p) in [("p_a", p_a), ("p_b", p_b)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidModel(format!("{name} = {p} outside (0, 1)")));
            }
        }
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::InvalidModel(format!("w = {w} outside (0, 1)")));
        }
        let tight = p_a.min(p_b).min(1.0 - p_a).min(1.0 - p_b);
        let eps0 = eps0.unwrap_or(tight);
        if eps0 > tight + 1e-15 {
            return Err(Error::InvalidModel(format!(
                "support {{{p_a}, {p_b}}} not inside [eps0, 1 - eps0] for eps0 = {eps0}"
            )));
        }
        Self::finish(ModelKind::TwoPoint { p_a, p_b, w }, eps0, 1.0, None)
    }

    /// Two-point law specified through `alpha = q/p`.
    pub fn two_point_alpha(alpha_a: f64, alpha_b: f64, w: f64, eps0: Option<f64>) -> Result<Self> {
        if !(alpha_a > 0.0 && alpha_b > 0.0 && alpha_a.is_finite() && alpha_b.is_finite()) {
            return Err(Error::InvalidModel("alpha values must be positive and finite".into()));
        }
        Self::two_point(1.0 / (1.0 + alpha_a), 1.0 / (1.0 + alpha_b), w, eps0)
    }

    /// Deterministic environment `p_i = p` (a degenerate two-point law).
    pub fn constant(p: f64) -> Result<Self> {
        Self::two_point(p, p, 0.5, None)
    }

    /// Beta(a, b) law rescaled onto `[eps0, 1 - eps0]`.
    pub fn scaled_beta(a: f64, b: f64, eps0: f64) -> Result<Self> {
        if !(a >= 1.0 && b >= 1.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidModel(format!("scaled beta needs a, b >= 1 (got {a}, {b})")));
        }
        if !(eps0 > 0.0 && eps0 < 0.5) {
            return Err(Error::InvalidModel(format!("eps0 = {eps0} outside (0, 1/2)")));
        }
        let kind = ModelKind::ScaledBeta { a, b };
        let lo = eps0;
        let width = 1.0 - 2.0 * eps0;
        let shape = |p: f64| {
            let x = ((p - lo) / width).clamp(0.0, 1.0);
            x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0)
        };
        let (gx, gw) = gauss_legendre(8);
        let h = width / BETA_TABLE_CELLS as f64;
        let mut cdf = Vec::with_capacity(BETA_TABLE_CELLS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 0..BETA_TABLE_CELLS {
            let c = lo + h * (i as f64 + 0.5);
            let cell: f64 = gx.iter().zip(&gw).map(|(x, w)| w * shape(c + 0.5 * h * x)).sum::<f64>() * 0.5 * h;
            acc += cell;
            cdf.push(acc);
        }
        let norm = acc;
        for c in cdf.iter_mut() {
            *c /= norm;
        }
        let table = CdfTable { lo, width: h, cdf };
        Self::finish(kind, eps0, norm, Some(Arc::new(table)))
    }

    fn finish(kind: ModelKind, eps0: f64, beta_norm: f64, cdf: Option<Arc<CdfTable>>) -> Result<Self> {
        if !(eps0 > 0.0 && eps0 < 0.5) {
            return Err(Error::InvalidModel(format!("eps0 = {eps0} outside (0, 1/2)")));
        }
        let mut model = EnvironmentModel {
            kind,
            eps0,
            tail_index: Err(Error::NoPositiveRoot("not solved".into())),
            warnings: Vec::new(),
            beta_norm,
            cdf,
        };
        let drift = model.mean_log_alpha();
        if drift.abs() < 1e-12 {
            return Err(Error::DegenerateRecurrent);
        }
        if drift > 0.0 {
            return Err(Error::InvalidModel(format!(
                "E[ln(p/q)] = {:.6} <= 0: the walk is not transient to the right",
                -drift
            )));
        }
        model.warnings = model.check_lattice();
        for w in &model.warnings {
            log::warn!("environment model {:?}: {:?}", model.kind, w);
        }
        model.tail_index = solve_tail_index(&model, TAIL_INDEX_TOL);
        Ok(model)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn warnings(&self) -> &[ModelWarning] {
        &self.warnings
    }

    /// Cached tail index (solved to [`TAIL_INDEX_TOL`] at construction).
    pub fn tail_index(&self) -> Result<f64> {
        self.tail_index.clone()
    }

    pub fn spec(&self) -> ModelSpec {
        match self.kind {
            ModelKind::TwoPoint { p_a, p_b, w } => ModelSpec::TwoPoint { p_a, p_b, w, eps0: Some(self.eps0) },
            ModelKind::ScaledBeta { a, b } => ModelSpec::ScaledBeta { a, b, eps0: self.eps0 },
        }
    }

    /// `E[f(p)]`: exact for two-point laws, adaptive quadrature otherwise.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        match self.kind {
            ModelKind::TwoPoint { p_a, p_b, w } => w * f(p_a) + (1.0 - w) * f(p_b),
            ModelKind::ScaledBeta { a, b } => {
                let lo = self.eps0;
                let width = 1.0 - 2.0 * lo;
                let norm = self.beta_norm;
                integrate(
                    |x: f64| {
                        let p = lo + width * x;
                        x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0) * f(p) * width / norm
                    },
                    0.0,
                    1.0,
                    1e-15,
                    1e-13,
                    2000,
                )
                .value
            }
        }
    }

    /// `ln E[alpha^h]`, evaluated stably for large `h`.
    pub fn log_mean_alpha_pow(&self, h: f64) -> f64 {
        let la = |p: f64| ((1.0 - p) / p).ln();
        match self.kind {
            ModelKind::TwoPoint { p_a, p_b, w } => {
                let xa = w.ln() + h * la(p_a);
                let xb = (1.0 - w).ln() + h * la(p_b);
                let m = xa.max(xb);
                m + ((xa - m).exp() + (xb - m).exp()).ln()
            }
            ModelKind::ScaledBeta { .. } => {
                // alpha is maximal at p = eps0.
                let shift = h * la(self.eps0).max(0.0);
                shift + self.expect(|p| (h * la(p) - shift).exp()).ln()
            }
        }
    }

    pub fn mean_alpha_pow(&self, h: f64) -> f64 {
        self.log_mean_alpha_pow(h).exp()
    }

    /// `E[ln alpha]`; negative for every accepted model.
    pub fn mean_log_alpha(&self) -> f64 {
        self.expect(|p| ((1.0 - p) / p).ln())
    }

    /// `P(q > p)`.
    pub fn prob_trap_site(&self) -> f64 {
        match self.kind {
            ModelKind::TwoPoint { p_a, p_b, w } => {
                w * f64::from(u8::from(p_a < 0.5)) + (1.0 - w) * f64::from(u8::from(p_b < 0.5))
            }
            ModelKind::ScaledBeta { .. } => {
                if self.eps0 < 0.5 {
                    self.expect(|p| if p < 0.5 { 1.0 } else { 0.0 })
                } else {
                    0.0
                }
            }
        }
    }

    /// Exact annealed mean `E[rho] = E[1/p] / (1 - E[alpha])`, finite only for `s > 1`.
    pub fn mean_rho(&self) -> Option<f64> {
        let ea = self.mean_alpha_pow(1.0);
        (ea < 1.0).then(|| self.expect(|p| 1.0 / p) / (1.0 - ea))
    }

    /// Map a uniform in [0, 1) to a site probability.
    #[inline]
    pub fn p_from_uniform(&self, u: f64) -> f64 {
        match self.kind {
            ModelKind::TwoPoint { p_a, p_b, w } => {
                if u < w {
                    p_a
                } else {
                    p_b
                }
            }
            ModelKind::ScaledBeta { .. } => self.cdf.as_ref().expect("beta table").invert(u),
        }
    }

    /// Draw one site probability from an arbitrary generator.
    #[inline]
    pub fn sample_p<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        self.p_from_uniform(unit_f64(rng.next_u64()))
    }

    fn check_lattice(&self) -> Vec<ModelWarning> {
        let ModelKind::TwoPoint { p_a, p_b, .. } = self.kind else {
            return Vec::new();
        };
        let la = ((1.0 - p_a) / p_a).ln();
        let lb = ((1.0 - p_b) / p_b).ln();
        if la.abs() < 1e-300 || lb.abs() < 1e-300 || p_a == p_b {
            return vec![ModelWarning::ArithmeticSupport { ratio: f64::NAN, numerator: 0, denominator: 1 }];
        }
        let ratio = la / lb;
        match rational_approximation(ratio, 1000, 1e-9) {
            Some((num, den)) => vec![ModelWarning::ArithmeticSupport { ratio, numerator: num, denominator: den }],
            None => Vec::new(),
        }
    }
}

/// Continued-fraction search for `num/den` with `den <= max_den` within `tol`.
fn rational_approximation(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e12 {
            break;
        }
        let ai = a as i64;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        if k2.abs() > max_den {
            break;
        }
        if ((h2 as f64) / (k2 as f64) - x).abs() <= tol * x.abs().max(1.0) {
            return Some((h2, k2));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// Solve `E[alpha^s] = 1` for `s > 0` by bisection on the convex map
/// `h -> ln E[alpha^h]`, bracketed in `[tol, 64]`.
pub fn solve_tail_index(model: &EnvironmentModel, tol: f64) -> Result<f64> {
    if model.mean_log_alpha().abs() < 1e-12 {
        return Err(Error::DegenerateRecurrent);
    }
    if model.prob_trap_site() <= 0.0 {
        return Err(Error::NoPositiveRoot("P(q > p) = 0, so E[alpha^s] < 1 for every s > 0".into()));
    }
    let g = |h: f64| model.log_mean_alpha_pow(h);
    let mut lo = tol.max(1e-12);
    let mut hi = MAX_TAIL_INDEX;
    if g(lo) >= 0.0 {
        return Err(Error::NoPositiveRoot(format!("E[alpha^h] >= 1 already at h = {lo}")));
    }
    if g(hi) <= 0.0 {
        return Err(Error::NoPositiveRoot(format!("E[alpha^h] < 1 on the whole bracket up to {hi}")));
    }
    // Bracket width well below tol so that E[alpha^(s -/+ 10 tol)] straddles 1.
    let width = (tol * 1e-3).max(1e-15);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= width * mid.max(1.0) {
            break;
        }
    }
    let s = 0.5 * (lo + hi);
    let resid = (model.mean_alpha_pow(s) - 1.0).abs();
    if resid > tol.max(1e-13) {
        return Err(Error::NoPositiveRoot(format!("bisection stalled with residual {resid:.3e}")));
    }
    Ok(s)
}

/// One sampled environment on the window `[offset, offset + p.len())`.
///
/// Model-backed environments can regenerate any other window from their
/// seed (see [`crate::seeds`]); synthetic ones cannot.
#[derive(Debug, Clone)]
pub struct Environment {
    offset: i64,
    p: Vec<f64>,
    seed: u64,
    model: Option<EnvironmentModel>,
}

#[inline]
fn site_word_pos(i: i64) -> u128 {
    ((i as i128 - i64::MIN as i128) as u128) * 2
}

fn fill_sites(model: &EnvironmentModel, seed: u64, lo: i64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(site_word_pos(lo));
    for v in out.iter_mut() {
        *v = model.p_from_uniform(unit_f64(rng.next_u64()));
    }
}

/// Sample sites `lo..hi` of the environment keyed by `seed`.
pub fn sample_environment(model: &EnvironmentModel, lo: i64, hi: i64, seed: u64) -> Result<Environment> {
    if lo >= hi {
        return Err(Error::InvalidArgument(format!("empty window [{lo}, {hi})")));
    }
    let len = usize::try_from(hi - lo).map_err(|_| Error::InvalidArgument("window too large".into()))?;
    let mut p = vec![0.0; len];
    fill_sites(model, seed, lo, &mut p);
    Ok(Environment { offset: lo, p, seed, model: Some(model.clone()) })
}

impl Environment {
    /// Hand-built environment for tests and diagnostics. Values must lie in
    /// `(0, 1]`; `p = 1` (never step left) is allowed here only.
    pub fn from_values(offset: i64, p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidArgument("empty environment".into()));
        }
        if let Some(bad) = p.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::InvalidArgument(format!("site probability {bad} outside (0, 1]")));
        }
        Ok(Environment { offset, p, seed: 0, model: None })
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    /// One past the last stored site.
    pub fn end(&self) -> i64 {
        self.offset + self.p.len() as i64
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model(&self) -> Option<&EnvironmentModel> {
        self.model.as_ref()
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn contains(&self, i: i64) -> bool {
        i >= self.offset && i < self.end()
    }

    /// Stored `p_i`; panics outside the window.
    #[inline]
    pub fn p(&self, i: i64) -> f64 {
        self.p[(i - self.offset) as usize]
    }

    /// `alpha_i = q_i / p_i`, always derived from `p`.
    #[inline]
    pub fn alpha(&self, i: i64) -> f64 {
        let p = self.p(i);
        (1.0 - p) / p
    }

    /// `p` on `[lo, hi)`, regenerating sites outside the stored window when
    /// the environment is model-backed.
    pub fn p_range(&self, lo: i64, hi: i64) -> Result<Vec<f64>> {
        if lo >= hi {
            return Ok(Vec::new());
        }
        let mut out = vec![0.0; (hi - lo) as usize];
        let (s_lo, s_hi) = (lo.max(self.offset), hi.min(self.end()));
        if s_lo < s_hi {
            out[(s_lo - lo) as usize..(s_hi - lo) as usize]
                .copy_from_slice(&self.p[(s_lo - self.offset) as usize..(s_hi - self.offset) as usize]);
        }
        let needs_left = lo < self.offset;
        let needs_right = hi > self.end();
        if needs_left || needs_right {
            let Some(model) = &self.model else {
                return Err(Error::WindowTooSmall(format!(
                    "synthetic environment covers [{}, {}), requested [{lo}, {hi})",
                    self.offset,
                    self.end()
                )));
            };
            if needs_left {
                let stop = hi.min(self.offset);
                fill_sites(model, self.seed, lo, &mut out[..(stop - lo) as usize]);
            }
            if needs_right {
                let start = lo.max(self.end());
                fill_sites(model, self.seed, start, &mut out[(start - lo) as usize..]);
            }
        }
        Ok(out)
    }

    /// The same environment restricted or extended to `[lo, hi)`.
    pub fn window(&self, lo: i64, hi: i64) -> Result<Environment> {
        if lo >= hi {
            return Err(Error::InvalidArgument(format!("empty window [{lo}, {hi})")));
        }
        Ok(Environment { offset: lo, p: self.p_range(lo, hi)?, seed: self.seed, model: self.model.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_term(s: f64, w: f64, a: f64, b: f64) -> f64 {
        w * a.powf(s) + (1.0 - w) * b.powf(s)
    }

    #[test]
    fn s_equals_two_for_alpha_2_half() {
        let m = EnvironmentModel::two_point_alpha(2.0, 0.5, 0.2, None).unwrap();
        // 0.2 * 4 + 0.8 * 0.25 = 1 exactly.
        assert!((two_term(2.0, 0.2, 2.0, 0.5) - 1.0).abs() < 1e-15);
        let s = solve_tail_index(&m, 1e-12).unwrap();
        assert!((s - 2.0).abs() < 1e-9, "s = {s}");
    }

    #[test]
    fn s_for_alpha_2_quarter_matches_independent_bisection() {
        // Oracle: plain bisection on 2^(s-1) + 2^(-2s-1) - 1 over (0.5, 1).
        let f = |s: f64| 2f64.powf(s - 1.0) + 2f64.powf(-2.0 * s - 1.0) - 1.0;
        let (mut lo, mut hi) = (0.5, 1.0);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let oracle = 0.5 * (lo + hi);
        let m = EnvironmentModel::two_point_alpha(2.0, 0.25, 0.5, None).unwrap();
        let s = m.tail_index().unwrap();
        assert!((s - oracle).abs() < 1e-9, "{s} vs {oracle}");
        assert!(s > 0.5 && s < 1.0);
    }

    #[test]
    fn constant_drift_has_no_root() {
        let m = EnvironmentModel::constant(2.0 / 3.0).unwrap();
        assert!(matches!(solve_tail_index(&m, 1e-10), Err(Error::NoPositiveRoot(_))));
        assert!(m.tail_index().is_err());
    }

    #[test]
    fn recurrent_and_left_transient_models_rejected() {
        assert_eq!(EnvironmentModel::two_point_alpha(2.0, 0.5, 0.5, None).unwrap_err(), Error::DegenerateRecurrent);
        assert!(matches!(EnvironmentModel::two_point_alpha(2.0, 0.5, 0.9, None), Err(Error::InvalidModel(_))));
        assert!(matches!(EnvironmentModel::two_point(0.3, 1.0, 0.5, None), Err(Error::InvalidModel(_))));
        assert!(matches!(EnvironmentModel::two_point(0.3, 0.8, 0.5, Some(0.25)), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn lattice_support_is_flagged_not_rejected() {
        // ln 2 / ln(1/4) = -1/2.
        let m = EnvironmentModel::two_point_alpha(2.0, 0.25, 0.5, None).unwrap();
        assert!(matches!(m.warnings(), [ModelWarning::ArithmeticSupport { numerator: -1, denominator: 2, .. }]));
        let m = EnvironmentModel::two_point_alpha(2.0, 1.0 / 3.0, 0.5, None).unwrap();
        assert!(m.warnings().is_empty());
    }

    #[test]
    fn scaled_beta_tail_index_and_sampling() {
        let m = EnvironmentModel::scaled_beta(2.5, 2.0, 0.1).unwrap();
        let s = m.tail_index().unwrap();
        assert!((m.mean_alpha_pow(s) - 1.0).abs() < 1e-10);
        assert!(m.mean_alpha_pow(s - 1e-3) < 1.0 && m.mean_alpha_pow(s + 1e-3) > 1.0);
        // Sample mean of p against the exact beta mean eps0 + (1-2 eps0) a/(a+b).
        let env = sample_environment(&m, 0, 200_000, 5).unwrap();
        let mean = env.values().iter().sum::<f64>() / env.len() as f64;
        let exact = 0.1 + 0.8 * 2.5 / 4.5;
        assert!((mean - exact).abs() < 2e-3, "{mean} vs {exact}");
        assert!(env.values().iter().all(|&p| (0.1..=0.9).contains(&p)));
        assert!((m.expect(|p| p) - exact).abs() < 1e-10);
    }

    #[test]
    fn two_point_support_and_frequency() {
        let m = EnvironmentModel::two_point(0.3, 0.8, 0.35, None).unwrap();
        let env = sample_environment(&m, -500_000, 500_000, 11).unwrap();
        assert!(env.values().iter().all(|&p| p == 0.3 || p == 0.8));
        let n = env.len() as f64;
        let k = env.values().iter().filter(|&&p| p == 0.3).count() as f64;
        let se = (0.35 * 0.65 / n).sqrt();
        assert!((k / n - 0.35).abs() < 4.0 * se);
    }

    #[test]
    fn windows_are_consistent_and_deterministic() {
        let m = EnvironmentModel::two_point(0.3, 0.8, 0.35, None).unwrap();
        let a = sample_environment(&m, 0, 100, 42).unwrap();
        let b = sample_environment(&m, 0, 50, 42).unwrap();
        let c = sample_environment(&m, -20, 30, 42).unwrap();
        assert_eq!(&a.values()[..50], b.values());
        assert_eq!(&a.values()[..30], &c.values()[20..]);
        assert_eq!(a.values(), sample_environment(&m, 0, 100, 42).unwrap().values());
        let ext = b.p_range(-5, 100).unwrap();
        assert_eq!(&ext[5..], a.values());
        assert_eq!(&ext[..5], &c.values()[15..20]);
    }

    #[test]
    fn synthetic_environment_cannot_extend() {
        let e = Environment::from_values(0, vec![1.0; 10]).unwrap();
        assert!(e.p_range(0, 10).is_ok());
        assert!(matches!(e.p_range(0, 11), Err(Error::WindowTooSmall(_))));
        assert!(Environment::from_values(0, vec![0.0]).is_err());
    }
}
