//! Limiting objects: power-law Poisson processes and their marked sums,
//! stable and Fréchet targets, and the cluster-law estimators.

mod stable;

pub use stable::{stable_cdf, stable_cdf_with, InversionOptions, StableLaw, StableLawTable};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::env_model::EnvironmentModel;
use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::seeds::{derive_seed, domain, walk_rng};
use crate::stats::{ks_statistic, mean_se};
use crate::walk::{Regime, REGIME_TOL};

pub(crate) const REGIME_SLACK: f64 = REGIME_TOL;

/// Poisson process with intensity `c θ^{-1-s}` on `[δ, upper)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawPpp {
    pub c: f64,
    pub s: f64,
    pub delta: f64,
    /// Optional cut; `None` is `+∞`.
    pub upper: Option<f64>,
}

impl PowerLawPpp {
    pub fn new(c: f64, s: f64, delta: f64) -> Result<Self> {
        if !(c > 0.0 && s > 0.0 && delta > 0.0 && c.is_finite() && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("need c, s, delta > 0; got {c}, {s}, {delta}")));
        }
        Ok(PowerLawPpp { c, s, delta, upper: None })
    }

    pub fn with_upper(self, upper: f64) -> Result<Self> {
        if !(upper > self.delta) {
            return Err(Error::InvalidArgument(format!("upper cut {upper} must exceed delta {}", self.delta)));
        }
        Ok(PowerLawPpp { upper: Some(upper), ..self })
    }

    pub fn intensity(&self, theta: f64) -> f64 {
        if theta >= self.delta && self.upper.is_none_or(|u| theta < u) {
            self.c * theta.powf(-1.0 - self.s)
        } else {
            0.0
        }
    }

    /// `μ([a, b))`.
    pub fn measure(&self, a: f64, b: f64) -> f64 {
        let lo = a.max(self.delta);
        let hi = self.upper.map_or(b, |u| b.min(u));
        if hi <= lo {
            return 0.0;
        }
        let tail = |x: f64| if x.is_infinite() { 0.0 } else { x.powf(-self.s) };
        self.c / self.s * (tail(lo) - tail(hi))
    }

    pub fn mean_count(&self) -> f64 {
        self.measure(self.delta, f64::INFINITY)
    }

    /// `∫ θ^k dμ`, or `None` when it diverges.
    pub fn moment(&self, k: f64) -> Option<f64> {
        let e = k - self.s;
        let lo = self.delta;
        match self.upper {
            None if e >= 0.0 => None,
            None => Some(self.c * lo.powf(e) / -e),
            Some(u) if e.abs() < 1e-12 => Some(self.c * (u / lo).ln()),
            Some(u) => Some(self.c * (u.powf(e) - lo.powf(e)) / e),
        }
    }

    /// Points in arbitrary order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mean = self.mean_count();
        let count = if mean > 0.0 { Poisson::new(mean).expect("finite mean").sample(rng) as usize } else { 0 };
        let lo = self.delta.powf(-self.s);
        let hi = self.upper.map_or(0.0, |u| u.powf(-self.s));
        (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                (lo - u * (lo - hi)).powf(-1.0 / self.s)
            })
            .collect()
    }

    /// Law of the regime sum over this process; the cut, if any, is ignored.
    pub fn stable_law(&self, regime: Regime) -> Result<StableLaw> {
        StableLaw::new(self.c, self.s, self.delta, regime)
    }
}

pub fn sample_ppp(spec: &PowerLawPpp, seed: u64) -> Vec<f64> {
    spec.sample(&mut walk_rng(derive_seed(seed, domain::SAMPLER, 0)))
}

/// Attach i.i.d. `Exp(1)` marks.
pub fn mark_ppp<R: Rng + ?Sized>(points: &[f64], rng: &mut R) -> Vec<(f64, f64)> {
    points.iter().map(|&t| (t, Exp1.sample(rng))).collect()
}

/// One draw of the regime sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YDraw {
    /// `Σ θΓ` (sub) or `Σ θ(Γ - 1)` (s ≥ 1).
    pub value: f64,
    pub theta_sum: f64,
    /// `E Σ θ` over the θ-part that is compensated in the limit:
    /// `[δ, ∞)` for `s > 1`, `[δ, 1)` for `s = 1`; zero for `s < 1`.
    pub centering: f64,
    pub points: usize,
}

impl YDraw {
    /// `Σ θ - centering`.
    pub fn centered_theta_sum(&self) -> f64 {
        self.theta_sum - self.centering
    }
}

fn sum_centering(spec: &PowerLawPpp, regime: Regime) -> f64 {
    match regime {
        Regime::Sub => 0.0,
        Regime::Critical => spec.c * -(spec.delta.min(1.0)).ln(),
        _ => spec.moment(1.0).unwrap_or(f64::NAN),
    }
}

pub fn sample_y<R: Rng + ?Sized>(spec: &PowerLawPpp, regime: Regime, rng: &mut R) -> Result<YDraw> {
    let centered = match regime {
        Regime::Sub if spec.s < 1.0 => false,
        Regime::Critical | Regime::Super if spec.s >= 1.0 - REGIME_SLACK && spec.s < 2.0 => true,
        _ => return Err(Error::RegimeMismatch(format!("no Poisson sum for s = {} in {regime:?}", spec.s))),
    };
    let marked = mark_ppp(&spec.sample(rng), rng);
    let shift = if centered { 1.0 } else { 0.0 };
    Ok(YDraw {
        value: marked.iter().map(|(t, g)| t * (g - shift)).sum(),
        theta_sum: marked.iter().map(|(t, _)| t).sum(),
        centering: sum_centering(spec, regime),
        points: marked.len(),
    })
}

/// Intensity of `{Γ_j θ_j}`: `E_Γ[f(θ/Γ)/Γ]`.
pub fn product_intensity(spec: &PowerLawPpp, theta: f64) -> f64 {
    if theta <= 0.0 {
        return 0.0;
    }
    // f(θ/g)/g is nonzero for g in (θ/upper, θ/δ].
    let hi = theta / spec.delta;
    let lo = spec.upper.map_or(0.0, |u| theta / u);
    integrate(|g: f64| (-g).exp() * spec.intensity(theta / g) / g, lo, hi, 1e-300, 1e-11, 400).value
}

pub fn frechet_cdf(c: f64, s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-(c / s) * x.powf(-s)).exp()
    }
}

pub fn frechet_median(c: f64, s: f64) -> f64 {
    (c / s / std::f64::consts::LN_2).powf(1.0 / s)
}

/// Maximum-likelihood `c` for a Fréchet law with known `s`.
pub fn fit_frechet_c(sample: &[f64], s: f64) -> Result<f64> {
    if sample.is_empty() || sample.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InsufficientData("Fréchet fit needs positive data".into()));
    }
    let sum: f64 = sample.iter().map(|x| x.powf(-s)).sum();
    Ok(s * sample.len() as f64 / sum)
}

/// Normal CDF.
pub fn normal_cdf(mean: f64, sd: f64, x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}

/// Best `c` for an untruncated sub law by minimising the KS distance;
/// uses `Y_c = c^{1/s} Y_1` so one unit table serves every `c`.
pub fn fit_stable_scale(sample: &[f64], unit: &StableLawTable) -> Result<(f64, f64)> {
    let law = unit.law;
    if law.centered || law.delta > 0.0 || (law.c - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument("scale fit needs the untruncated unit sub law".into()));
    }
    if sample.is_empty() {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let ks = |lc: f64| {
        let f = (-lc / law.s).exp();
        ks_statistic(&sorted, |x| unit.cdf(x * f))
    };
    let (mut best, mut best_d) = (0.0, f64::INFINITY);
    for i in 0..=240 {
        let lc = -6.0 + 12.0 * i as f64 / 240.0;
        let d = ks(lc);
        if d < best_d {
            best = lc;
            best_d = d;
        }
    }
    let (mut a, mut b) = (best - 0.05, best + 0.05);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (x1, x2) = (b - phi * (b - a), a + phi * (b - a));
        if ks(x1) <= ks(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let lc = 0.5 * (a + b);
    let d = ks(lc);
    Ok(if d < best_d { (lc.exp(), d) } else { (best.exp(), best_d) })
}

/// Monte Carlo estimates of `μ^m(y)` for `m = 1..=m_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub y: f64,
    pub m: Vec<usize>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_mu_m(
    model: &EnvironmentModel,
    s: f64,
    c_hat: f64,
    delta: f64,
    y: f64,
    m_max: usize,
    n_samples: usize,
    seed: u64,
) -> Result<MuEstimate> {
    if m_max < 1 || !(y >= 1.0) || n_samples < 2 {
        return Err(Error::InvalidArgument("need m >= 1, y >= 1 and at least two samples".into()));
    }
    let factor = delta.powf(-s) * c_hat;
    let mut out = MuEstimate { y, m: Vec::new(), mean: Vec::new(), se: Vec::new() };
    let mut p = vec![0.0; m_max + 1];
    let mut d = vec![0.0; m_max + 1];
    for m in 1..=m_max {
        let mut rng = walk_rng(derive_seed(seed, domain::SAMPLER, m as u64));
        let vals: Vec<f64> = (0..n_samples)
            .map(|_| {
                for pj in p[..=m].iter_mut() {
                    *pj = model.sample_p(&mut rng);
                }
                // D_j = p_j^{-1} α_{j+1} ⋯ α_m
                let mut prod = 1.0;
                for j in (0..=m).rev() {
                    d[j] = prod / p[j];
                    prod *= (1.0 - p[j]) / p[j];
                }
                let top = d[1..=m].iter().copied().fold(0.0, f64::max);
                if top < d[0] / y {
                    factor * ((d[0] / y).powf(s) - top.powf(s))
                } else {
                    0.0
                }
            })
            .collect();
        let (mean, se) = mean_se(&vals);
        out.m.push(m);
        out.mean.push(mean);
        out.se.push(se);
    }
    Ok(out)
}

/// How the site carrying the cluster maximum is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SiteLaw {
    /// Plain environment law.
    Plain,
    /// Weighted by `p^{-s}`, as seen from a site with a large occupation.
    Tilted,
}

/// One draw of `1 + Σ_{k=1}^{K} p_{-k}^{-1} q_0 α_{-1} ⋯ α_{-k+1}`.
pub fn sample_limit_b<R: Rng + ?Sized>(
    model: &EnvironmentModel,
    terms: usize,
    law: SiteLaw,
    s: f64,
    rng: &mut R,
) -> f64 {
    let p0 = match law {
        SiteLaw::Plain => model.sample_p(rng),
        SiteLaw::Tilted => sample_tilted_p(model, s, rng),
    };
    let mut prod = 1.0 - p0;
    let mut total = 1.0;
    for _ in 0..terms {
        let p = model.sample_p(rng);
        total += prod / p;
        prod *= (1.0 - p) / p;
    }
    total
}

/// Draw `p` with density proportional to `p^{-s}` under the model.
pub fn sample_tilted_p<R: Rng + ?Sized>(model: &EnvironmentModel, s: f64, rng: &mut R) -> f64 {
    let cap = model.eps0().powf(-s);
    loop {
        let p = model.sample_p(rng);
        if rng.random::<f64>() * cap <= p.powf(-s) {
            return p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_two_sample;

    fn rng(seed: u64) -> crate::seeds::WalkRng {
        walk_rng(seed)
    }

    #[test]
    fn unit_process_mean_count() {
        let spec = PowerLawPpp::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(spec.mean_count(), 1.0);
        let mut r = rng(1);
        let counts: Vec<f64> = (0..100_000).map(|_| spec.sample(&mut r).len() as f64).collect();
        let (m, se) = mean_se(&counts);
        assert!((m - 1.0).abs() < 4.0 * se && (0.99..=1.01).contains(&m), "{m} ± {se}");
    }

    #[test]
    fn tail_counts_and_delta_scaling() {
        let spec = PowerLawPpp::new(1.3, 0.7, 0.5).unwrap();
        let mut r = rng(2);
        let draws = 50_000;
        let over: Vec<f64> =
            (0..draws).map(|_| spec.sample(&mut r).iter().filter(|&&t| t > 1.0).count() as f64).collect();
        let (m, se) = mean_se(&over);
        let expect = 1.3 / 0.7 * 1.0f64.powf(-0.7);
        assert!((m - expect).abs() < 4.0 * se, "{m} vs {expect}");
        let doubled = PowerLawPpp::new(1.3, 0.7, 1.0).unwrap();
        assert!((doubled.mean_count() / spec.mean_count() - 2f64.powf(-0.7)).abs() < 1e-14);
    }

    #[test]
    fn upper_cut_stays_inside() {
        let spec = PowerLawPpp::new(2.0, 0.5, 0.1).unwrap().with_upper(1.0).unwrap();
        let mut r = rng(3);
        for _ in 0..1000 {
            assert!(spec.sample(&mut r).iter().all(|&t| (0.1..1.0).contains(&t)));
        }
        assert!((spec.moment(1.0).unwrap() - 2.0 * (1.0 - 0.1f64.sqrt()) / 0.5).abs() < 1e-12);
        assert!(PowerLawPpp::new(1.0, 0.5, 1.0).unwrap().moment(1.0).is_none());
    }

    #[test]
    fn marks_are_exponential_and_independent() {
        assert!(mark_ppp(&[], &mut rng(0)).is_empty());
        let spec = PowerLawPpp::new(5.0, 1.5, 0.2).unwrap();
        let mut r = rng(4);
        let mut pairs = Vec::new();
        while pairs.len() < 100_000 {
            let pts = spec.sample(&mut r);
            pairs.extend(mark_ppp(&pts, &mut r));
        }
        let g: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let (m, se) = mean_se(&g);
        assert!((m - 1.0).abs() < 4.0 * se);
        let lt: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
        let r = crate::stats::pearson(&lt, &g);
        assert!(r.abs() < 4.0 / (pairs.len() as f64).sqrt());
    }

    #[test]
    fn centered_sum_has_mean_zero() {
        let spec = PowerLawPpp::new(1.0, 1.5, 0.1).unwrap();
        let mut r = rng(5);
        let y: Vec<f64> = (0..100_000).map(|_| sample_y(&spec, Regime::Super, &mut r).unwrap().value).collect();
        let (m, se) = mean_se(&y);
        assert!(m.abs() < 4.0 * se, "{m} ± {se}");
        assert!(matches!(sample_y(&spec, Regime::Sub, &mut r), Err(Error::RegimeMismatch(_))));
    }

    #[test]
    fn truncated_tables_match_monte_carlo() {
        for (spec, regime) in [
            (PowerLawPpp::new(1.0, 0.7, 0.5).unwrap(), Regime::Sub),
            (PowerLawPpp::new(1.0, 1.5, 0.25).unwrap(), Regime::Super),
        ] {
            let mut r = rng(6);
            let mut y: Vec<f64> = (0..200_000).map(|_| sample_y(&spec, regime, &mut r).unwrap().value).collect();
            y.sort_by(f64::total_cmp);
            // The extreme tails outside the grid cost at most 0.003 each in KS.
            let mut grid: Vec<f64> =
                (0..=400).map(|i| crate::stats::quantile(&y, 0.003 + 0.994 * i as f64 / 400.0)).collect();
            grid.push(0.0);
            grid.push(-1e-12);
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let t = stable_cdf(&spec.stable_law(regime).unwrap(), &grid).unwrap();
            let d = crate::stats::ks_statistic_atoms(&y, |x| t.cdf(x));
            assert!(d < 0.01, "{regime:?}: KS {d}");
        }
    }

    /// Positive stable draw with Laplace transform `exp(-C t^s)` (Kanter).
    fn kanter<R: Rng>(s: f64, scale: f64, r: &mut R) -> f64 {
        use std::f64::consts::PI;
        let u: f64 = r.random();
        let e: f64 = Exp1.sample(r);
        let a = (s * PI * u).sin() / (PI * u).sin().powf(1.0 / s);
        let b = ((1.0 - s) * PI * u).sin() / e;
        scale.powf(1.0 / s) * a * b.powf((1.0 - s) / s)
    }

    #[test]
    fn untruncated_table_matches_kanter_draws() {
        let s = 0.6942;
        let law = StableLaw::new(1.0, s, 0.0, Regime::Sub).unwrap();
        let scale = std::f64::consts::PI / (std::f64::consts::PI * s).sin();
        let mut r = rng(13);
        let y: Vec<f64> = (0..200_000).map(|_| kanter(s, scale, &mut r)).collect();
        let grid: Vec<f64> = (0..3000).map(|i| 1e-3 * 1.005f64.powi(i)).collect();
        let t = stable_cdf(&law, &grid).unwrap();
        let d = ks_statistic(&y, |x| t.cdf(x));
        assert!(d < 0.01, "KS {d}");
    }

    #[test]
    fn scale_fit_recovers_c() {
        let s = 0.6;
        let unit = StableLaw::new(1.0, s, 0.0, Regime::Sub).unwrap();
        let grid: Vec<f64> = (0..2500).map(|i| 1e-3 * 1.005f64.powi(i)).collect();
        let table = stable_cdf(&unit, &grid).unwrap();
        let c: f64 = 2.5;
        let scale = c * std::f64::consts::PI / (std::f64::consts::PI * s).sin();
        let mut r = rng(7);
        let sample: Vec<f64> = (0..5000).map(|_| kanter(s, scale, &mut r)).collect();
        let (c_hat, d) = fit_stable_scale(&sample, &table).unwrap();
        assert!((c_hat / c - 1.0).abs() < 0.05, "{c_hat}");
        assert!(d < 0.03);
    }

    #[test]
    fn frechet_basics() {
        assert_eq!(frechet_cdf(1.0, 0.7, 0.0), 0.0);
        assert!(frechet_cdf(1.0, 0.7, 1e12) > 0.999_999);
        let med = frechet_median(1.3, 0.7);
        assert!((frechet_cdf(1.3, 0.7, med) - 0.5).abs() < 1e-14);
        let mut r = rng(8);
        let sample: Vec<f64> = (0..50_000)
            .map(|_| {
                let u: f64 = r.random();
                (-(1.3 / 0.7) / u.ln()).powf(1.0 / 0.7)
            })
            .collect();
        let c = fit_frechet_c(&sample, 0.7).unwrap();
        assert!((c / 1.3 - 1.0).abs() < 0.03, "{c}");
    }

    #[test]
    fn product_intensity_matches_bin_counts() {
        let spec = PowerLawPpp::new(1.0, 0.8, 0.3).unwrap();
        let mut r = rng(9);
        let bins = [(0.1, 0.5), (0.5, 2.0), (2.0, 10.0)];
        let draws = 50_000;
        let mut counts = vec![vec![0.0; draws]; bins.len()];
        for d in 0..draws {
            for (t, g) in mark_ppp(&spec.sample(&mut r), &mut r) {
                for (b, &(lo, hi)) in bins.iter().enumerate() {
                    if (lo..hi).contains(&(t * g)) {
                        counts[b][d] += 1.0;
                    }
                }
            }
        }
        for (b, &(lo, hi)) in bins.iter().enumerate() {
            let expect = integrate(|x| product_intensity(&spec, x), lo, hi, 1e-12, 1e-9, 200).value;
            let (m, se) = mean_se(&counts[b]);
            assert!((m - expect).abs() < 4.0 * se, "bin {b}: {m} vs {expect}");
        }
    }

    #[test]
    fn mu_m_positive_and_vanishing() {
        let model = EnvironmentModel::two_point_alpha(2.0, 0.25, 0.5, None).unwrap();
        let s = model.tail_index().unwrap();
        let est = estimate_mu_m(&model, s, 1.0, 0.5, 1.0, 4, 40_000, 11).unwrap();
        for (m, se) in est.mean.iter().zip(&est.se) {
            assert!(*m > 4.0 * se);
        }
        let far = estimate_mu_m(&model, s, 1.0, 0.5, 1e9, 2, 10_000, 11).unwrap();
        assert!(far.mean.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn limit_b_constant_environment() {
        let model = EnvironmentModel::constant(2.0 / 3.0).unwrap();
        let mut r = rng(10);
        let b = sample_limit_b(&model, 60, SiteLaw::Plain, 1.0, &mut r);
        assert!((b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn limit_b_truncation_consistent() {
        let model = EnvironmentModel::two_point_alpha(2.0, 0.5, 0.2, None).unwrap();
        let mut r = rng(12);
        let a: Vec<f64> = (0..20_000).map(|_| sample_limit_b(&model, 40, SiteLaw::Plain, 2.0, &mut r)).collect();
        let b: Vec<f64> = (0..20_000).map(|_| sample_limit_b(&model, 80, SiteLaw::Plain, 2.0, &mut r)).collect();
        assert!(a.iter().all(|&x| x >= 1.0));
        let (ma, sa) = mean_se(&a);
        let (mb, sb) = mean_se(&b);
        assert!((ma - mb).abs() < 4.0 * (sa * sa + sb * sb).sqrt());
        assert!(ks_two_sample(&a, &b).p_value.unwrap() > 0.001);
    }
}
