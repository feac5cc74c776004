//! The acceptance suite: fourteen statistical and exact checks run against
//! the library, each reporting its checks and plot-ready tables.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AcceptanceConfig, Caps, ExperimentConfig};
use crate::env_model::{sample_environment, EnvironmentModel, ModelSpec};
use crate::error::{Error, Result};
use crate::limit_laws::{
    fit_frechet_c, fit_stable_scale, frechet_cdf, normal_cdf, product_intensity, stable_cdf, PowerLawPpp, StableLaw,
};
use crate::occupancy::{compute_rho, compute_rho_with, log_levels, sample_z, tail_from_draws};
use crate::quadrature::integrate;
use crate::seeds::{derive_seed, domain, walk_rng};
use crate::stats::chain::{chain_moments_linear, simulate_chain};
use crate::stats::{
    batch_means_se, chain_from_profile, chain_moments, ks_discrete, ks_statistic, ks_test, ks_two_sample, mean_se,
    pearson, poisson_count_test, quantile, ChainMoments, ThreeStateChain,
};
use crate::traps::{attach_marks, cluster_profile_options, detect_clusters_with, env_seed, MarkedProcessSample};
use crate::walk::{Regime, Sampler, WalkOptions, WalkSetup};

pub const CRITERIA: [(u32, &str); 14] = [
    (1, "exact recursion"),
    (2, "quenched geometric law"),
    (3, "three-state chain"),
    (4, "neighbour correlation"),
    (5, "tail constants"),
    (6, "Poisson clusters"),
    (7, "exponential marks"),
    (8, "reconstruction"),
    (9, "annealed stable law"),
    (10, "hitting versus occupation time"),
    (11, "maximum occupation"),
    (12, "Gaussian regime"),
    (13, "Campbell and transforms"),
    (14, "sampler equivalence"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    Error,
}

/// One comparison `value op limit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub op: &'static str,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn below(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { label: label.into(), value, op: "<", limit, passed: value < limit }
    }

    fn at_most(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { label: label.into(), value, op: "<=", limit, passed: value <= limit }
    }

    fn above(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { label: label.into(), value, op: ">", limit, passed: value > limit }
    }

    fn at_least(label: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { label: label.into(), value, op: ">=", limit, passed: value >= limit }
    }
}

/// A named numeric table, written as CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: &'static str,
    pub status: Status,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub tables: Vec<Table>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        matches!(self.status, Status::Pass | Status::Skipped)
    }

    /// One line: id, status, name and the failing checks.
    pub fn summary(&self) -> String {
        let status = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
            Status::Error => "ERROR",
        };
        let mut line = format!("criterion {:>2} {status:<5} {} ({:.1} s)", self.id, self.name, self.seconds);
        for c in self.checks.iter().filter(|c| !c.passed) {
            line.push_str(&format!("; {}: {:.4e} not {} {:.4e}", c.label, c.value, c.op, c.limit));
        }
        for n in &self.notes {
            if self.status == Status::Error {
                line.push_str(&format!("; {n}"));
            }
        }
        line
    }
}

#[derive(Default)]
struct Outcome {
    checks: Vec<Check>,
    tables: Vec<Table>,
    notes: Vec<String>,
}

/// Everything kept from one environment and one walk at a given `N`.
#[derive(Debug, Clone)]
struct EnvRun {
    t_n: u64,
    t_tilde: u64,
    xi_star: u64,
    samples: Vec<MarkedProcessSample>,
}

#[derive(Debug)]
struct Batch {
    n: usize,
    s: f64,
    runs: Vec<EnvRun>,
    discarded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum ModelRole {
    Sub,
    Super,
}

struct Model {
    model: EnvironmentModel,
    s: f64,
}

impl Model {
    fn new(spec: &ModelSpec) -> Result<Self> {
        let model = spec.build()?;
        let s = model.tail_index()?;
        Ok(Model { model, s })
    }
}

/// Runs the acceptance criteria for one configuration, caching the large
/// shared batches between criteria.
pub struct Verifier {
    acc: AcceptanceConfig,
    caps: Caps,
    seed: u64,
    sub: Model,
    sup: Model,
    gauss: Model,
    batches: Mutex<HashMap<(ModelRole, usize), Arc<Batch>>>,
}

fn find_delta(ladder: &[f64], d: f64) -> Result<usize> {
    ladder
        .iter()
        .position(|&x| (x - d).abs() < 1e-12)
        .ok_or_else(|| Error::Config(format!("acceptance.cluster_deltas must contain {d}")))
}

fn ecdf_table(name: &str, sample: &[f64], fitted: impl Fn(f64) -> f64) -> Table {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut t = Table::new(name, &["x", "ecdf", "fitted"]);
    let k = 200.min(sorted.len());
    for i in 0..k {
        let q = (i as f64 + 0.5) / k as f64;
        let x = quantile(&sorted, q);
        let below = sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64;
        t.push(vec![x, below, fitted(x)]);
    }
    t
}

impl Verifier {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let acc = config.acceptance.clone();
        Ok(Verifier {
            sub: Model::new(&acc.sub_model)?,
            sup: Model::new(&acc.super_model)?,
            gauss: Model::new(&acc.gaussian_model)?,
            acc,
            caps: config.caps.clone(),
            seed: config.seed,
            batches: Mutex::new(HashMap::new()),
        })
    }

    fn seed_for(&self, id: u32) -> u64 {
        derive_seed(self.seed, domain::EXPERIMENT, id as u64)
    }

    fn crossing_options(&self) -> WalkOptions {
        WalkOptions { step_budget: self.acc.crossing_step_budget, ..self.caps.walk_options() }
    }

    pub fn run_all(&self) -> Vec<CriterionReport> {
        CRITERIA.iter().map(|&(id, _)| self.run(id)).collect()
    }

    pub fn run(&self, id: u32) -> CriterionReport {
        let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
        let start = Instant::now();
        let result = match id {
            1 => self.exact_recursion(),
            2 => self.geometric_law(),
            3 => self.three_state_chain(),
            4 => self.neighbour_correlation(),
            5 => self.tail_constants(),
            6 => self.poisson_clusters(),
            7 => self.exponential_marks(),
            8 => self.reconstruction(),
            9 => self.annealed_stable(),
            10 => self.hitting_time(),
            11 => self.maximum(),
            12 => self.gaussian(),
            13 => self.campbell(),
            14 => self.sampler_equivalence(),
            _ => Err(Error::InvalidArgument(format!("no criterion {id}"))),
        };
        let seconds = start.elapsed().as_secs_f64();
        match result {
            Ok(o) => {
                let status = if o.checks.iter().all(|c| c.passed) { Status::Pass } else { Status::Fail };
                CriterionReport { id, name, status, checks: o.checks, notes: o.notes, tables: o.tables, seconds }
            }
            Err(e) => CriterionReport {
                id,
                name,
                status: Status::Error,
                checks: Vec::new(),
                notes: vec![e.to_string()],
                tables: Vec::new(),
                seconds,
            },
        }
    }

    fn batch(&self, role: ModelRole, n: usize) -> Result<Arc<Batch>> {
        let mut cache = self.batches.lock().expect("batch cache");
        if let Some(b) = cache.get(&(role, n)) {
            return Ok(b.clone());
        }
        let (m, deltas, tag) = match role {
            ModelRole::Sub => (&self.sub, self.acc.cluster_deltas.as_slice(), 101),
            ModelRole::Super => (&self.sup, &[][..], 102),
        };
        let seed = derive_seed(self.seed_for(tag), domain::EXPERIMENT, n as u64);
        let b = Arc::new(self.run_batch(m, n, deltas, seed)?);
        if b.discarded > 0 {
            log::warn!("{} of {} walks over budget at N = {n}", b.discarded, self.acc.environments);
        }
        cache.insert((role, n), b.clone());
        Ok(b)
    }

    fn run_batch(&self, m: &Model, n: usize, deltas: &[f64], seed: u64) -> Result<Batch> {
        let span = self.acc.span_rule.span(&m.model, m.s, n);
        let popts = cluster_profile_options(span, self.caps.rho_tol);
        let wopts = self.crossing_options();
        let runs: Vec<Result<Option<EnvRun>>> = (0..self.acc.environments)
            .into_par_iter()
            .map(|e| {
                let es = env_seed(seed, e);
                let env = sample_environment(&m.model, 0, (n + popts.lookahead) as i64, es)?;
                let prof = compute_rho_with(&env, n, &popts)?;
                let setup = WalkSetup::new(&env, n, wopts)?;
                let o = match setup.simulate_crossings_fast(derive_seed(es, domain::WALK, 0)) {
                    Ok(o) => o,
                    Err(Error::StepBudgetExceeded { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let samples = deltas
                    .iter()
                    .map(|&d| attach_marks(&detect_clusters_with(&prof, m.s, d, span)?, &o, &prof))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Some(EnvRun { t_n: o.t_n, t_tilde: o.t_tilde, xi_star: o.xi_star, samples }))
            })
            .collect();
        let mut out = Vec::with_capacity(runs.len());
        let mut discarded = 0;
        for r in runs {
            match r? {
                Some(v) => out.push(v),
                None => discarded += 1,
            }
        }
        Ok(Batch { n, s: m.s, runs: out, discarded })
    }

    fn exact_recursion(&self) -> Result<Outcome> {
        let n = 1000;
        let m = EnvironmentModel::constant(2.0 / 3.0)?;
        let env = sample_environment(&m, 0, n as i64, self.seed_for(1))?;
        let start = Instant::now();
        let prof = compute_rho(&env, n, 1e-10)?;
        let secs = start.elapsed().as_secs_f64();
        let err = prof.window().iter().map(|r| (r - 3.0).abs()).fold(0.0, f64::max);
        let mut t = Table::new("c01_rho_constant", &["site", "rho"]);
        for (i, r) in prof.window().iter().enumerate().step_by(50) {
            t.push(vec![i as f64, *r]);
        }
        Ok(Outcome {
            checks: vec![Check::at_most("max |rho - 3|", err, 1e-9), Check::below("seconds", secs, 1.0)],
            tables: vec![t],
            notes: Vec::new(),
        })
    }

    fn geometric_law(&self) -> Result<Outcome> {
        let n = self.acc.geometric_n;
        let k = self.acc.geometric_sites;
        let seed = self.seed_for(2);
        let env = sample_environment(&self.sub.model, 0, n as i64 + 1, derive_seed(seed, domain::ENVIRONMENT, 0))?;
        let prof = compute_rho(&env, n, 1e-12)?;
        let setup = WalkSetup::new(&env, n, self.caps.walk_options())?;
        let sites: Vec<usize> = (1..=k).map(|j| j * n / (k + 1)).collect();
        let batch =
            setup.replicas(Sampler::Direct, self.acc.geometric_walks, derive_seed(seed, domain::WALK, 0), |_, o| {
                sites.iter().map(|&i| o.xi[i]).collect::<Vec<u64>>()
            })?;
        let mut out = Outcome::default();
        if batch.discarded > 0 {
            out.notes.push(format!("{} walks over budget", batch.discarded));
        }
        let mut t = Table::new("c02_geometric", &["site", "rho", "mean_xi", "ks"]);
        for (j, &site) in sites.iter().enumerate() {
            let xs: Vec<i64> = batch.values.iter().map(|v| v[j] as i64).collect();
            let rho = prof.rho[site];
            let r = ks_discrete(&xs, |x| if x < 1 { 0.0 } else { 1.0 - (1.0 - 1.0 / rho).powi(x as i32) });
            let mean = xs.iter().sum::<i64>() as f64 / xs.len() as f64;
            t.push(vec![site as f64, rho, mean, r.statistic]);
            out.checks.push(Check::below(format!("KS at site {site}"), r.statistic, 0.01));
        }
        out.tables.push(t);
        Ok(out)
    }

    fn three_state_chain(&self) -> Result<Outcome> {
        let seed = self.seed_for(3);
        let mut rng = walk_rng(derive_seed(seed, domain::SAMPLER, 0));
        let fields = |m: &ChainMoments| [m.u1, m.u2, m.v1, m.v2, m.w1, m.w2, m.cov, m.corr];
        let mut worst = 0.0f64;
        for _ in 0..self.acc.random_chains {
            let p_bar = rng.random_range(0.05..0.95);
            let w: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.05..1.0));
            let tot: f64 = w.iter().sum();
            let (q_dbar, eps) = (w[0] / tot, w[2] / tot);
            let c = ThreeStateChain::new(p_bar, 1.0 - p_bar, q_dbar, 1.0 - q_dbar - eps, eps)?;
            let (a, b) = (fields(&chain_moments(&c)), fields(&chain_moments_linear(&c).0));
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1e-300));
            }
        }
        let mut out = Outcome::default();
        out.checks.push(Check::at_most("closed vs linear relative error", worst, 1e-12));

        let c = ThreeStateChain::new(0.4, 0.6, 0.3, 0.5, 0.2)?;
        let m = chain_moments(&c);
        let runs = self.acc.chain_runs;
        let draws: Vec<(f64, f64)> = (0..runs)
            .map(|_| {
                let (a, b) = simulate_chain(&c, &mut rng);
                (a as f64, b as f64)
            })
            .collect();
        let n1: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let n2: Vec<f64> = draws.iter().map(|d| d.1).collect();
        let prod: Vec<f64> = draws.iter().map(|d| d.0 * d.1).collect();
        let (corr, corr_se) = batch_means_se(&n1, &n2, 100, pearson);
        let mut t = Table::new("c03_pinned_chain", &["quantity", "closed_form", "monte_carlo", "se"]);
        for (k, (label, exact, (mc, se))) in [
            ("E N1", m.u1, mean_se(&n1)),
            ("E N2", m.v1, mean_se(&n2)),
            ("E N1 N2", m.w1, mean_se(&prod)),
            ("Corr", m.corr, (corr, corr_se)),
        ]
        .into_iter()
        .enumerate()
        {
            t.push(vec![k as f64, exact, mc, se]);
            out.checks.push(Check::below(format!("{label} deviation / SE"), (mc - exact).abs() / se, 4.0));
        }
        out.tables.push(t);
        Ok(out)
    }

    fn neighbour_correlation(&self) -> Result<Outcome> {
        let n = self.acc.correlation_n;
        let seed = self.seed_for(4);
        let env = sample_environment(&self.sub.model, 0, n as i64 + 1, derive_seed(seed, domain::ENVIRONMENT, 0))?;
        let prof = compute_rho(&env, n, 1e-12)?;
        let bins = [(5.0, 10.0), (10.0, 50.0), (50.0, 500.0)];
        let per_bin = self.acc.correlation_sites_per_bin;
        let mut sites: Vec<(usize, usize)> = Vec::new();
        for (b, &(lo, hi)) in bins.iter().enumerate() {
            let cand: Vec<usize> = (0..n - 1).filter(|&i| prof.rho[i] >= lo && prof.rho[i] < hi).collect();
            if cand.is_empty() {
                return Err(Error::InsufficientData(format!("no site with rho in [{lo}, {hi})")));
            }
            let take = per_bin.min(cand.len());
            sites.extend((0..take).map(|j| (cand[j * cand.len() / take], b)));
        }
        let setup = WalkSetup::new(&env, n, self.crossing_options())?;
        let batch = setup.replicas(
            Sampler::Crossings,
            self.acc.correlation_walks,
            derive_seed(seed, domain::WALK, 0),
            |_, o| sites.iter().map(|&(i, _)| (o.xi[i] as f64, o.xi[i + 1] as f64)).collect::<Vec<_>>(),
        )?;
        struct Site {
            bin: usize,
            rho: f64,
            r: f64,
            se: f64,
            pred: f64,
        }
        let mut rows = Vec::new();
        for (j, &(i, bin)) in sites.iter().enumerate() {
            let x: Vec<f64> = batch.values.iter().map(|v| v[j].0).collect();
            let y: Vec<f64> = batch.values.iter().map(|v| v[j].1).collect();
            let (r, se) = batch_means_se(&x, &y, 100, pearson);
            let pred = chain_moments(&chain_from_profile(&prof, i, i + 1)?).corr;
            rows.push((i, Site { bin, rho: prof.rho[i], r, se, pred }));
        }
        let c_fit = rows.iter().filter(|(_, s)| s.bin == 0).map(|(_, s)| (1.0 - s.r) * s.rho).fold(0.0, f64::max);
        let mut out = Outcome::default();
        out.notes.push(format!("fitted C = {c_fit:.4}"));
        let mut t = Table::new("c04_neighbour_correlation", &["site", "bin", "rho", "corr", "se", "predicted"]);
        for (i, s) in &rows {
            t.push(vec![*i as f64, s.bin as f64, s.rho, s.r, s.se, s.pred]);
            out.checks.push(Check::below(
                format!("site {i}: |corr - predicted| / SE"),
                (s.r - s.pred).abs() / s.se,
                4.0,
            ));
            if s.bin > 0 {
                out.checks.push(Check::at_most(format!("site {i}: 1 - corr"), 1.0 - s.r, c_fit / s.rho + 4.0 * s.se));
            }
        }
        out.tables.push(t);
        Ok(out)
    }

    fn tail_constants(&self) -> Result<Outcome> {
        let draws = sample_z(&self.sub.model, self.acc.tail_samples, self.seed_for(5));
        let mut zs: Vec<f64> = draws.iter().map(|d| d.1).collect();
        zs.sort_by(f64::total_cmp);
        let lo = quantile(&zs, 0.99);
        let hi = zs[zs.len().saturating_sub(501)];
        if hi <= lo {
            return Err(Error::InsufficientExceedances { found: zs.len() / 100, needed: 500 });
        }
        let est = tail_from_draws(&draws, self.sub.s, &log_levels(lo, hi, self.acc.tail_levels))?;
        let mut out = Outcome::default();
        out.checks.push(Check::at_most("max / min c_hat", est.flatness(), 1.5));
        let mut t = Table::new("c05_tail_constants", &["x", "c_hat", "c_star_hat", "ratio", "mean_p_pow"]);
        for (i, r) in est.ratios().iter().enumerate() {
            let x = est.levels[i];
            t.push(vec![x, est.c_hat[i], est.c_star_hat[i], *r, est.mean_p_pow]);
            out.checks.push(Check::at_most(
                format!("ratio deviation at x = {x:.3e}"),
                (r / est.mean_p_pow - 1.0).abs(),
                0.2,
            ));
        }
        out.tables.push(t);
        Ok(out)
    }

    fn poisson_clusters(&self) -> Result<Outcome> {
        let b = self.batch(ModelRole::Sub, self.acc.n)?;
        let ladder = &self.acc.cluster_deltas;
        let (k1, kh) = (find_delta(ladder, 1.0)?, find_delta(ladder, 0.5)?);
        let mut out = Outcome::default();
        let mut hist = Table::new("c06_cluster_counts", &["delta", "count", "environments"]);
        let mut lambda = [0.0; 2];
        for (slot, &k) in [k1, kh].iter().enumerate() {
            let d = ladder[k];
            let counts: Vec<u64> = b.runs.iter().map(|r| r.samples[k].clusters.len() as u64).collect();
            lambda[slot] = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
            let top = counts.iter().copied().max().unwrap_or(0);
            for c in 0..=top {
                hist.push(vec![d, c as f64, counts.iter().filter(|&&x| x == c).count() as f64]);
            }
            let chi = poisson_count_test(&counts)?;
            out.checks.push(Check::above(
                format!("Poisson chi-square p at delta {d}"),
                chi.p_value.unwrap_or(0.0),
                0.01,
            ));
            let pos: Vec<f64> = b.runs.iter().flat_map(|r| r.samples[k].clusters.iter().map(|c| c.t)).collect();
            let ks = ks_test(&pos, |x| x.clamp(0.0, 1.0));
            out.checks.push(Check::above(format!("uniform positions p at delta {d}"), ks.p_value.unwrap_or(0.0), 0.01));
        }
        let ratio = lambda[1] / lambda[0];
        let target = 2f64.powf(b.s);
        out.notes.push(format!("lambda(1) = {:.4}, lambda(0.5) = {:.4}", lambda[0], lambda[1]));
        out.checks.push(Check::at_most("|lambda ratio / 2^s - 1|", (ratio / target - 1.0).abs(), 0.15));
        out.tables.push(hist);
        Ok(out)
    }

    fn exponential_marks(&self) -> Result<Outcome> {
        let b = self.batch(ModelRole::Sub, self.acc.n)?;
        let k = (0..self.acc.cluster_deltas.len())
            .min_by(|&i, &j| self.acc.cluster_deltas[i].total_cmp(&self.acc.cluster_deltas[j]))
            .expect("nonempty ladder");
        let marks: Vec<f64> =
            b.runs.iter().flat_map(|r| r.samples[k].clusters.iter().filter_map(|c| c.gamma)).collect();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for r in &b.runs {
            for w in r.samples[k].clusters.windows(2) {
                if let (Some(a), Some(c)) = (w[0].gamma, w[1].gamma) {
                    x.push(a);
                    y.push(c);
                }
            }
        }
        let mut out = Outcome::default();
        out.checks.push(Check::at_least("marks", marks.len() as f64, self.acc.min_marks as f64));
        let ks = ks_statistic(&marks, |g| 1.0 - (-g.max(0.0)).exp());
        out.checks.push(Check::below("KS vs Exp(1)", ks, 0.02));
        let pairs = x.len() as f64;
        let r = if x.len() > 2 { pearson(&x, &y) } else { f64::NAN };
        out.checks.push(Check::below("|pairwise corr| * sqrt(pairs)", r.abs() * pairs.sqrt(), 3.0));
        out.notes.push(format!("{} marks, {} pairs, corr {r:.4}", marks.len(), x.len()));
        out.tables.push(ecdf_table("c07_marks", &marks, |g| 1.0 - (-g.max(0.0)).exp()));
        Ok(out)
    }

    fn reconstruction(&self) -> Result<Outcome> {
        let b = self.batch(ModelRole::Sub, self.acc.n)?;
        let scale = Regime::Sub.scale(b.s, b.n);
        let ladder = &self.acc.cluster_deltas;
        let mut order: Vec<usize> = (0..ladder.len()).collect();
        order.sort_by(|&i, &j| ladder[j].total_cmp(&ladder[i]));
        let tested = [find_delta(ladder, 1.0)?, find_delta(ladder, 0.5)?, find_delta(ladder, 0.25)?];
        let mut out = Outcome::default();
        let mut t = Table::new("c08_reconstruction", &["delta", "median_abs_residual", "mean_residual", "se"]);
        let mut medians = HashMap::new();
        for &k in &order {
            let res: Vec<f64> = b.runs.iter().map(|r| r.t_n as f64 / scale - r.samples[k].marked_sum()).collect();
            let abs: Vec<f64> = res.iter().map(|v| v.abs()).collect();
            let med = crate::stats::median(&abs);
            let (mean, se) = mean_se(&res);
            t.push(vec![ladder[k], med, mean, se]);
            medians.insert(k, med);
            if tested.contains(&k) {
                out.checks.push(Check::at_least(
                    format!("mean residual + 3 SE at delta {}", ladder[k]),
                    mean + 3.0 * se,
                    0.0,
                ));
            }
        }
        for w in tested.windows(2) {
            out.checks.push(Check::below(
                format!("median |R| at delta {} vs {}", ladder[w[1]], ladder[w[0]]),
                medians[&w[1]],
                medians[&w[0]],
            ));
        }
        out.tables.push(t);
        Ok(out)
    }

    fn annealed_stable(&self) -> Result<Outcome> {
        let b = self.batch(ModelRole::Sub, self.acc.n)?;
        let scale = Regime::Sub.scale(b.s, b.n);
        let sample: Vec<f64> = b.runs.iter().map(|r| r.t_n as f64 / scale).collect();
        let unit = StableLaw::new(1.0, b.s, 0.0, Regime::Sub)?;
        let grid: Vec<f64> = (0..2500).map(|i| 1e-3 * 1.005f64.powi(i)).collect();
        let table = stable_cdf(&unit, &grid)?;
        let (c, ks) = fit_stable_scale(&sample, &table)?;
        let f = c.powf(-1.0 / b.s);
        let mut out = Outcome::default();
        out.notes.push(format!("fitted c = {c:.4}, table error {:.2e}", table.error));
        out.checks.push(Check::below("KS vs fitted stable law", ks, 0.05));
        out.tables.push(ecdf_table("c09_stable", &sample, |x| table.cdf(x * f)));
        Ok(out)
    }

    fn hitting_time(&self) -> Result<Outcome> {
        let top = self.acc.n;
        let ladder = [top / 100, top / 10, top];
        let mut out = Outcome::default();
        let mut t = Table::new("c10_hitting_time", &["N", "p95"]);
        let mut p95 = Vec::new();
        for &n in &ladder {
            let b = self.batch(ModelRole::Sub, n)?;
            let scale = Regime::Sub.scale(b.s, n);
            let mut v: Vec<f64> = b.runs.iter().map(|r| (r.t_n as f64 - r.t_tilde as f64).abs() / scale).collect();
            v.sort_by(f64::total_cmp);
            let q = quantile(&v, 0.95);
            t.push(vec![n as f64, q]);
            p95.push(q);
        }
        for i in 1..ladder.len() {
            out.checks.push(Check::below(format!("p95 at N = {} vs {}", ladder[i], ladder[i - 1]), p95[i], p95[i - 1]));
        }
        out.tables.push(t);
        Ok(out)
    }

    fn maximum(&self) -> Result<Outcome> {
        let mut out = Outcome::default();
        for (role, label) in [(ModelRole::Sub, "sub"), (ModelRole::Super, "super")] {
            let b = self.batch(role, self.acc.n)?;
            let scale = (b.n as f64).powf(1.0 / b.s);
            let sample: Vec<f64> = b.runs.iter().map(|r| r.xi_star as f64 / scale).collect();
            let c = fit_frechet_c(&sample, b.s)?;
            let ks = ks_statistic(&sample, |x| frechet_cdf(c, b.s, x));
            out.notes.push(format!("{label}: s = {:.4}, fitted c = {c:.4}", b.s));
            out.checks.push(Check::below(format!("{label}: KS vs fitted Frechet"), ks, 0.03));
            out.tables.push(ecdf_table(&format!("c11_maximum_{label}"), &sample, |x| frechet_cdf(c, b.s, x)));
        }
        Ok(out)
    }

    fn gaussian(&self) -> Result<Outcome> {
        let n = self.acc.n;
        let m = &self.gauss;
        let mean_rho = m.model.mean_rho().ok_or_else(|| Error::InvalidArgument("E rho is infinite".into()))?;
        let scale = Regime::Gaussian.scale(m.s, n);
        let seed = self.seed_for(12);
        let walks = self.acc.clt_walks_per_env;
        let wopts = self.crossing_options();
        let popts = self.caps.rho_options();
        let per_env: Vec<Result<(f64, Vec<f64>, usize)>> = (0..self.acc.clt_environments)
            .into_par_iter()
            .map(|e| {
                let es = env_seed(seed, e);
                let env = sample_environment(&m.model, 0, n as i64, es)?;
                let prof = compute_rho_with(&env, n, &popts)?;
                let q = prof.total();
                let setup = WalkSetup::new(&env, n, wopts)?;
                let mut ts = Vec::with_capacity(walks);
                let mut dropped = 0;
                for w in 0..walks {
                    match setup.simulate_crossings_fast(derive_seed(es, domain::WALK, w as u64)) {
                        Ok(o) => ts.push((o.t_n as f64 - q) / scale),
                        Err(Error::StepBudgetExceeded { .. }) => dropped += 1,
                        Err(e) => return Err(e),
                    }
                }
                Ok(((q - n as f64 * mean_rho) / scale, ts, dropped))
            })
            .collect();
        let (mut t_all, mut u_all, mut u_env) = (Vec::new(), Vec::new(), Vec::new());
        let mut dropped = 0;
        for r in per_env {
            let (u, ts, d) = r?;
            dropped += d;
            u_env.push(u);
            for t in ts {
                t_all.push(t);
                u_all.push(u);
            }
        }
        let (mt, st) = mean_and_sd(&t_all);
        let ks = ks_statistic(&t_all, |x| normal_cdf(mt, st, x));
        let r = pearson(&t_all, &u_all);
        let (mu, su) = mean_and_sd(&u_env);
        let mut out = Outcome::default();
        if dropped > 0 {
            out.notes.push(format!("{dropped} walks over budget"));
        }
        out.notes.push(format!(
            "t: mean {mt:.4}, sd {st:.4}; u: mean {mu:.4}, sd {su:.4}, KS {:.4}",
            ks_statistic(&u_env, |x| normal_cdf(mu, su, x))
        ));
        out.checks.push(Check::below("KS of t vs fitted normal", ks, 0.02));
        out.checks.push(Check::below("|Corr(t, u)|", r.abs(), 0.05));
        out.tables.push(ecdf_table("c12_t", &t_all, |x| normal_cdf(mt, st, x)));
        out.tables.push(ecdf_table("c12_u", &u_env, |x| normal_cdf(mu, su, x)));
        Ok(out)
    }

    fn campbell(&self) -> Result<Outcome> {
        let draws = self.acc.campbell_draws;
        let seed = self.seed_for(13);
        let mut out = Outcome::default();
        let mut t = Table::new("c13_campbell", &["s", "kind", "bin_lo", "bin_hi", "expected", "observed", "se"]);
        for (si, s) in [0.7, 1.5].into_iter().enumerate() {
            let spec = PowerLawPpp::new(1.0, s, 0.5)?.with_upper(50.0)?;
            let kappa = 3.0;
            let map_edges = log_levels(kappa * 0.5, kappa * 50.0, 7);
            let prod_edges = log_levels(0.05, 100.0, 9);
            let mut rng = walk_rng(derive_seed(seed, domain::SAMPLER, si as u64));
            let mut sums = Vec::with_capacity(draws);
            let mut map_counts = vec![Vec::with_capacity(draws); map_edges.len() - 1];
            let mut prod_counts = vec![Vec::with_capacity(draws); prod_edges.len() - 1];
            let bin = |edges: &[f64], x: f64| {
                (x >= edges[0] && x < edges[edges.len() - 1]).then(|| edges.partition_point(|&e| e <= x) - 1)
            };
            for _ in 0..draws {
                let pts = spec.sample(&mut rng);
                sums.push(pts.iter().sum::<f64>());
                let mut mc = vec![0.0; map_counts.len()];
                let mut pc = vec![0.0; prod_counts.len()];
                for &p in &pts {
                    if let Some(i) = bin(&map_edges, kappa * p) {
                        mc[i] += 1.0;
                    }
                    let g: f64 = Exp1.sample(&mut rng);
                    if let Some(i) = bin(&prod_edges, g * p) {
                        pc[i] += 1.0;
                    }
                }
                for (v, c) in map_counts.iter_mut().zip(mc) {
                    v.push(c);
                }
                for (v, c) in prod_counts.iter_mut().zip(pc) {
                    v.push(c);
                }
            }
            let mean_exact = spec.moment(1.0).expect("bounded support");
            let var_exact = spec.moment(2.0).expect("bounded support");
            let (mean, mean_se_) = mean_se(&sums);
            let n = sums.len() as f64;
            let var = sums.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let m4 = sums.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
            let var_se = ((m4 - var * var) / n).sqrt();
            t.push(vec![s, 0.0, f64::NAN, f64::NAN, mean_exact, mean, mean_se_]);
            t.push(vec![s, 1.0, f64::NAN, f64::NAN, var_exact, var, var_se]);
            out.checks.push(Check::below(
                format!("s = {s}: mean of sum / SE"),
                (mean - mean_exact).abs() / mean_se_,
                4.0,
            ));
            out.checks.push(Check::below(
                format!("s = {s}: variance of sum / SE"),
                (var - var_exact).abs() / var_se,
                4.0,
            ));
            for (i, w) in map_edges.windows(2).enumerate() {
                let exact = integrate(|x: f64| spec.intensity(x / kappa) / kappa, w[0], w[1], 1e-14, 1e-12, 200).value;
                let (obs, se) = mean_se(&map_counts[i]);
                t.push(vec![s, 2.0, w[0], w[1], exact, obs, se]);
                out.checks.push(Check::below(
                    format!("s = {s}: scaled count in [{:.3}, {:.3}) / SE", w[0], w[1]),
                    (obs - exact).abs() / se,
                    4.0,
                ));
            }
            for (i, w) in prod_edges.windows(2).enumerate() {
                let exact = integrate(|x: f64| product_intensity(&spec, x), w[0], w[1], 1e-14, 1e-10, 200).value;
                let (obs, se) = mean_se(&prod_counts[i]);
                t.push(vec![s, 3.0, w[0], w[1], exact, obs, se]);
                out.checks.push(Check::below(
                    format!("s = {s}: product count in [{:.3}, {:.3}) / SE", w[0], w[1]),
                    (obs - exact).abs() / se,
                    4.0,
                ));
            }
        }
        out.tables.push(t);
        Ok(out)
    }

    fn sampler_equivalence(&self) -> Result<Outcome> {
        let n = self.acc.equivalence_n;
        let walks = self.acc.equivalence_walks;
        let seed = self.seed_for(14);
        let mut out = Outcome::default();
        let mut t = Table::new("c14_sampler_equivalence", &["environment", "statistic", "ks", "p_value"]);
        for e in 0..3u64 {
            let env = sample_environment(&self.sub.model, 0, n as i64, derive_seed(seed, domain::ENVIRONMENT, e))?;
            let setup = WalkSetup::new(&env, n, self.caps.walk_options())?;
            let pick = |_: usize, o: crate::walk::WalkOutcome| [o.t_tilde as f64, o.xi_star as f64, o.xi[0] as f64];
            let a = setup.replicas(Sampler::Direct, walks, derive_seed(seed, domain::WALK, 2 * e), pick)?;
            let b = setup.replicas(Sampler::Crossings, walks, derive_seed(seed, domain::WALK, 2 * e + 1), pick)?;
            for (k, label) in ["T_tilde", "xi_star", "xi_0"].iter().enumerate() {
                let x: Vec<f64> = a.values.iter().map(|v| v[k]).collect();
                let y: Vec<f64> = b.values.iter().map(|v| v[k]).collect();
                let r = ks_two_sample(&x, &y);
                let p = r.p_value.unwrap_or(0.0);
                t.push(vec![e as f64, k as f64, r.statistic, p]);
                out.checks.push(Check::above(format!("environment {e}, {label}: p"), p, 0.01));
            }
        }
        out.tables.push(t);
        Ok(out)
    }
}

fn mean_and_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_criteria_pass_on_defaults() {
        let v = Verifier::new(&ExperimentConfig::default()).unwrap();
        for id in [1, 3] {
            let r = v.run(id);
            assert_eq!(r.status, Status::Pass, "{}", r.summary());
        }
    }

    #[test]
    fn unknown_criterion_is_an_error() {
        let v = Verifier::new(&ExperimentConfig::default()).unwrap();
        assert_eq!(v.run(99).status, Status::Error);
    }

    #[test]
    fn table_csv_has_header_and_rows() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![1.0, 0.5]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1e0,5e-1\n");
    }
}
