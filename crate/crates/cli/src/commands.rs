use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use rwre_core::config::{ExperimentConfig, ResolvedConfig};
use rwre_core::occupancy::compute_rho_with;
use rwre_core::seeds::{derive_seed, domain};
use rwre_core::stats::poisson_count_test;
use rwre_core::traps::{attach_marks, cluster_profile_options, detect_clusters_with, env_seed, ClusterRow};
use rwre_core::verify::{CriterionReport, Verifier, CRITERIA};
use rwre_core::walk::{normalize, Centering, Regime, WalkSetup};
use rwre_core::{sample_environment, Error, Result as CoreResult};
use serde::Serialize;

use crate::manifest::{run_dir, tail_summary, RunManifest, TailSummary};
use crate::CliError;

const SIMULATE: u64 = 1;
const CLUSTERS: u64 = 2;

fn command_seed(config: &ExperimentConfig, command: u64, n: usize) -> u64 {
    derive_seed(derive_seed(config.seed, domain::EXPERIMENT, 1000 + command), domain::EXPERIMENT, n as u64)
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Walks over the step budget beyond this fraction make a run unusable.
const MAX_DISCARD_RATE: f64 = 1e-3;

fn centering(r: &ResolvedConfig, n: usize, tail: Option<&TailSummary>) -> Centering {
    let nf = n as f64;
    match r.regime {
        Regime::Super | Regime::Gaussian => Centering { annealed_mean: r.model.mean_rho().map(|m| m * nf), u_n: None },
        Regime::Critical => Centering { annealed_mean: None, u_n: tail.map(|t| t.c_star_hat * nf * nf.ln()) },
        Regime::Sub => Centering::default(),
    }
}

#[derive(Serialize)]
struct OutcomeRecord {
    env_index: usize,
    env_seed: u64,
    replica: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T_N")]
    t_n: u64,
    #[serde(rename = "T_tilde_N")]
    t_tilde: u64,
    xi_star: u64,
    quenched_mean: f64,
    #[serde(rename = "t_N")]
    t_norm: f64,
    #[serde(rename = "u_N")]
    u_norm: f64,
    truncated: bool,
}

#[derive(Serialize)]
struct SimulateSummary {
    #[serde(rename = "N")]
    n: usize,
    environments: usize,
    walks: usize,
    discarded: usize,
    usable: bool,
    buffer_max: usize,
    u_n: Option<f64>,
}

pub fn simulate(config: &ExperimentConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let r = config.validate()?;
    let (dir, hash) = run_dir(config)?;
    let mut manifest = RunManifest::new("simulate", &r, hash);
    if r.regime == Regime::Critical {
        manifest.tail = tail_summary(&r);
    }
    let mut summary = Vec::new();
    for &n in &config.n_ladder {
        let seed = command_seed(config, SIMULATE, n);
        let cent = centering(&r, n, manifest.tail.as_ref());
        let per_env: Vec<CoreResult<(Vec<OutcomeRecord>, usize, usize)>> = (0..config.replicas.environments)
            .into_par_iter()
            .map(|e| {
                let es = env_seed(seed, e);
                let env = sample_environment(&r.model, 0, n as i64, es)?;
                let prof = compute_rho_with(&env, n, &config.caps.rho_options())?;
                let q = prof.total();
                let setup = WalkSetup::new(&env, n, config.caps.walk_options())?;
                let batch = setup.replicas(
                    config.sampler,
                    config.replicas.walks_per_env,
                    derive_seed(es, domain::WALK, 0),
                    |rep, o| -> rwre_core::Result<OutcomeRecord> {
                        let norm = normalize(o.t_n as f64, q, n, r.s, r.regime, &cent)?;
                        Ok(OutcomeRecord {
                            env_index: e,
                            env_seed: es,
                            replica: rep,
                            n,
                            t_n: o.t_n,
                            t_tilde: o.t_tilde,
                            xi_star: o.xi_star,
                            quenched_mean: q,
                            t_norm: norm.t,
                            u_norm: norm.u,
                            truncated: o.truncated,
                        })
                    },
                )?;
                let rows = batch.values.into_iter().collect::<rwre_core::Result<Vec<_>>>()?;
                Ok((rows, batch.discarded, setup.buffer().size))
            })
            .collect();
        let (mut rows, mut discarded, mut buffer_max) = (Vec::new(), 0, 0);
        for res in per_env {
            let (r, d, b) = res?;
            rows.extend(r);
            discarded += d;
            buffer_max = buffer_max.max(b);
        }
        let name = format!("outcomes_N{n}.csv");
        summary.push(SimulateSummary {
            n,
            environments: config.replicas.environments,
            walks: rows.len(),
            discarded,
            usable: (discarded as f64) <= MAX_DISCARD_RATE * (rows.len() + discarded) as f64,
            buffer_max,
            u_n: cent.u_n,
        });
        write_rows(&dir.join(&name), rows)?;
        manifest.files.push(name);
    }
    write_rows(&dir.join("simulate_summary.csv"), summary)?;
    manifest.files.push("simulate_summary.csv".into());
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&dir)?;
    println!("{}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct ClusterRecordRow {
    env_index: usize,
    env_seed: u64,
    delta: f64,
    n: usize,
    t: f64,
    a: f64,
    b: f64,
    m: f64,
    theta: f64,
    gamma: Option<f64>,
    clipped: bool,
}

impl ClusterRecordRow {
    fn new(env_index: usize, delta: f64, row: ClusterRow) -> Self {
        ClusterRecordRow {
            env_index,
            env_seed: row.env_seed,
            delta,
            n: row.n,
            t: row.t,
            a: row.a,
            b: row.b,
            m: row.m,
            theta: row.theta,
            gamma: row.gamma,
            clipped: row.clipped,
        }
    }
}

#[derive(Serialize)]
struct ClusterSummary {
    #[serde(rename = "N")]
    n: usize,
    delta: f64,
    span: usize,
    environments: usize,
    clusters: u64,
    lambda_hat: f64,
    orphans: u64,
    massive: u64,
    poisson_p: Option<f64>,
}

pub fn clusters(config: &ExperimentConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let r = config.validate()?;
    let (dir, hash) = run_dir(config)?;
    let mut manifest = RunManifest::new("clusters", &r, hash);
    let mut summary = Vec::new();
    let deltas = &config.delta_ladder;
    for &n in &config.n_ladder {
        let seed = command_seed(config, CLUSTERS, n);
        let span = config.span_rule.span(&r.model, r.s, n);
        let popts = cluster_profile_options(span, config.caps.rho_tol);
        let per_env: Vec<CoreResult<Vec<_>>> = (0..config.replicas.environments)
            .into_par_iter()
            .map(|e| {
                let es = env_seed(seed, e);
                let env = sample_environment(&r.model, 0, (n + span) as i64, es)?;
                let prof = compute_rho_with(&env, n, &popts)?;
                let setup = WalkSetup::new(&env, n, config.caps.walk_options())?;
                let walk = match setup.run(config.sampler, derive_seed(es, domain::WALK, 0)) {
                    Ok(o) => Some(o),
                    Err(Error::StepBudgetExceeded { .. }) => None,
                    Err(e) => return Err(e),
                };
                deltas
                    .iter()
                    .map(|&d| {
                        let sample = detect_clusters_with(&prof, r.s, d, span)?;
                        let sample = match &walk {
                            Some(o) => attach_marks(&sample, o, &prof)?,
                            None => sample,
                        };
                        Ok((es, sample))
                    })
                    .collect()
            })
            .collect();
        let per_env = per_env.into_iter().collect::<CoreResult<Vec<_>>>()?;
        let mut rows = Vec::new();
        for (k, &d) in deltas.iter().enumerate() {
            let counts: Vec<u64> = per_env.iter().map(|e| e[k].1.clusters.len() as u64).collect();
            for (e, env) in per_env.iter().enumerate() {
                let (es, sample) = &env[k];
                rows.extend(sample.clusters.iter().map(|c| ClusterRecordRow::new(e, d, ClusterRow::new(*es, c))));
            }
            let total: u64 = counts.iter().sum();
            summary.push(ClusterSummary {
                n,
                delta: d,
                span,
                environments: counts.len(),
                clusters: total,
                lambda_hat: total as f64 / counts.len() as f64,
                orphans: per_env.iter().map(|e| e[k].1.orphans.len() as u64).sum(),
                massive: per_env.iter().map(|e| e[k].1.massive as u64).sum(),
                poisson_p: poisson_count_test(&counts).ok().and_then(|t| t.p_value),
            });
        }
        let name = format!("clusters_N{n}.csv");
        write_rows(&dir.join(&name), rows)?;
        manifest.files.push(name);
    }
    write_rows(&dir.join("cluster_summary.csv"), summary)?;
    manifest.files.push("cluster_summary.csv".into());
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&dir)?;
    println!("{}", dir.display());
    Ok(())
}

fn run_criteria(
    config: &ExperimentConfig,
    criteria: &[u32],
    command: &'static str,
) -> Result<(RunManifest, std::path::PathBuf, Instant), CliError> {
    let start = Instant::now();
    let r = config.validate()?;
    if let Some(bad) = criteria.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
        return Err(Error::Config(format!("no acceptance criterion {bad}")).into());
    }
    let (dir, hash) = run_dir(config)?;
    let mut manifest = RunManifest::new(command, &r, hash);
    manifest.tail = tail_summary(&r);
    let verifier = Verifier::new(config)?;
    let ids: Vec<u32> = if criteria.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { criteria.to_vec() };
    for id in ids {
        let report = verifier.run(id);
        if command == "verify" {
            println!("{}", report.summary());
        }
        for t in &report.tables {
            let name = format!("{}.csv", t.name);
            t.write_csv(BufWriter::new(File::create(dir.join(&name))?))?;
            manifest.files.push(name);
        }
        manifest.reports.push(report);
    }
    Ok((manifest, dir, start))
}

/// Returns whether every selected criterion passed.
pub fn verify(config: &ExperimentConfig, criteria: &[u32]) -> Result<bool, CliError> {
    let (mut manifest, dir, start) = run_criteria(config, criteria, "verify")?;
    if let Some(e) = manifest.reports.iter().find(|r| r.status == rwre_core::verify::Status::Error) {
        manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
        manifest.write(&dir)?;
        return Err(CliError::Setup(e.summary()));
    }
    let passed = manifest.reports.iter().all(CriterionReport::passed);
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&dir)?;
    println!("{}", dir.display());
    Ok(passed)
}

pub fn tables(config: &ExperimentConfig, criteria: &[u32]) -> Result<(), CliError> {
    let (mut manifest, dir, start) = run_criteria(config, criteria, "tables")?;
    let index: Vec<_> = manifest
        .reports
        .iter()
        .map(|r| (r.id, r.name, r.tables.iter().map(|t| t.name.clone()).collect::<Vec<_>>()))
        .collect();
    std::fs::write(dir.join("tables.json"), serde_json::to_string_pretty(&index)?)?;
    manifest.files.push("tables.json".into());
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&dir)?;
    println!("{}", dir.display());
    Ok(())
}
