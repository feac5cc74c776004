//! Experiment configuration: JSON schema, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env_model::{EnvironmentModel, ModelSpec};
use crate::error::{Error, Result};
use crate::occupancy::RhoOptions;
use crate::traps::SpanRule;
use crate::walk::{Regime, Sampler, WalkOptions};

/// Regime requested by a config: solved from `s`, or forced and checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegimeChoice {
    #[default]
    Auto,
    Sub,
    Critical,
    Super,
    Gaussian,
}

impl RegimeChoice {
    fn forced(self) -> Option<Regime> {
        match self {
            RegimeChoice::Auto => None,
            RegimeChoice::Sub => Some(Regime::Sub),
            RegimeChoice::Critical => Some(Regime::Critical),
            RegimeChoice::Super => Some(Regime::Super),
            RegimeChoice::Gaussian => Some(Regime::Gaussian),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplicaCounts {
    pub environments: usize,
    pub walks_per_env: usize,
}

impl Default for ReplicaCounts {
    fn default() -> Self {
        ReplicaCounts { environments: 2000, walks_per_env: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Caps {
    pub rho_tol: f64,
    pub step_budget: u64,
    pub return_tol: f64,
    pub max_buffer: usize,
    pub inversion_bound: f64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { rho_tol: 1e-8, step_budget: 1_000_000_000, return_tol: 1e-6, max_buffer: 1 << 20, inversion_bound: 1e-4 }
    }
}

impl Caps {
    pub fn walk_options(&self) -> WalkOptions {
        WalkOptions {
            step_budget: self.step_budget,
            return_tol: self.return_tol,
            max_buffer: self.max_buffer,
            ..WalkOptions::default()
        }
    }

    pub fn rho_options(&self) -> RhoOptions {
        RhoOptions { tol: self.rho_tol, ..RhoOptions::default() }
    }
}

fn sub_model() -> ModelSpec {
    ModelSpec::TwoPointAlpha { alpha_a: 2.0, alpha_b: 0.25, w: 0.5, eps0: None }
}

/// `w` putting `s = 3/2` on `alpha in {2, 1/4}`.
fn super_model() -> ModelSpec {
    let (a, b) = (2f64.powf(1.5), 0.25f64.powf(1.5));
    ModelSpec::TwoPointAlpha { alpha_a: 2.0, alpha_b: 0.25, w: (1.0 - b) / (a - b), eps0: None }
}

fn gaussian_model() -> ModelSpec {
    ModelSpec::TwoPointAlpha { alpha_a: 2.0, alpha_b: 0.5, w: 0.2, eps0: None }
}

/// Sizes of the acceptance experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcceptanceConfig {
    pub sub_model: ModelSpec,
    pub super_model: ModelSpec,
    pub gaussian_model: ModelSpec,
    /// Large-N experiments.
    pub n: usize,
    pub environments: usize,
    pub geometric_n: usize,
    pub geometric_sites: usize,
    pub geometric_walks: usize,
    pub random_chains: usize,
    pub chain_runs: usize,
    pub correlation_n: usize,
    pub correlation_walks: usize,
    pub correlation_sites_per_bin: usize,
    pub tail_samples: usize,
    pub tail_levels: usize,
    pub cluster_deltas: Vec<f64>,
    pub span_rule: SpanRule,
    pub min_marks: usize,
    pub clt_environments: usize,
    pub clt_walks_per_env: usize,
    pub campbell_draws: usize,
    pub equivalence_n: usize,
    pub equivalence_walks: usize,
    /// Step budget for crossing-sampler experiments, whose cost does not
    /// grow with the number of steps.
    pub crossing_step_budget: u64,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig {
            sub_model: sub_model(),
            super_model: super_model(),
            gaussian_model: gaussian_model(),
            n: 100_000,
            environments: 2000,
            geometric_n: 1000,
            geometric_sites: 10,
            geometric_walks: 100_000,
            random_chains: 1000,
            chain_runs: 1_000_000,
            correlation_n: 10_000,
            correlation_walks: 10_000,
            correlation_sites_per_bin: 30,
            tail_samples: 1_000_000,
            tail_levels: 8,
            cluster_deltas: vec![1.0, 0.5, 0.25, 0.125, 0.0625],
            span_rule: SpanRule::Separation,
            min_marks: 5000,
            clt_environments: 2000,
            clt_walks_per_env: 50,
            campbell_draws: 100_000,
            equivalence_n: 200,
            equivalence_walks: 5000,
            crossing_step_budget: u64::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub regime: RegimeChoice,
    pub n_ladder: Vec<usize>,
    #[serde(default = "default_deltas")]
    pub delta_ladder: Vec<f64>,
    #[serde(default)]
    pub span_rule: SpanRule,
    #[serde(default)]
    pub replicas: ReplicaCounts,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub acceptance: AcceptanceConfig,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_deltas() -> Vec<f64> {
    vec![1.0, 0.5, 0.25]
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "default".into(),
            model: sub_model(),
            regime: RegimeChoice::Auto,
            n_ladder: vec![1000, 10_000, 100_000],
            delta_ladder: default_deltas(),
            span_rule: SpanRule::LnLn,
            replicas: ReplicaCounts::default(),
            seed: 20_240_601,
            workers: None,
            sampler: Sampler::Crossings,
            caps: Caps::default(),
            out_dir: default_out(),
            acceptance: AcceptanceConfig::default(),
        }
    }
}

/// A validated config with its solved model.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub model: EnvironmentModel,
    pub s: f64,
    pub regime: Regime,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Check the schema-level invariants and solve the model.
    pub fn validate(&self) -> Result<ResolvedConfig> {
        if self.n_ladder.is_empty() {
            return Err(Error::Config("n_ladder is empty".into()));
        }
        if let Some(&n) = self.n_ladder.iter().find(|&&n| n < 16) {
            return Err(Error::Config(format!("n_ladder entry {n} is below 16")));
        }
        if self.delta_ladder.is_empty() {
            return Err(Error::Config("delta_ladder is empty".into()));
        }
        for &d in &self.delta_ladder {
            positive("delta", d)?;
        }
        if self.replicas.environments == 0 || self.replicas.walks_per_env == 0 {
            return Err(Error::Config("replica counts must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        positive("rho_tol", self.caps.rho_tol)?;
        positive("return_tol", self.caps.return_tol)?;
        positive("inversion_bound", self.caps.inversion_bound)?;
        if self.caps.step_budget == 0 || self.caps.max_buffer == 0 {
            return Err(Error::Config("step_budget and max_buffer must be positive".into()));
        }
        let a = &self.acceptance;
        if a.cluster_deltas.is_empty() {
            return Err(Error::Config("acceptance.cluster_deltas is empty".into()));
        }
        for &d in &a.cluster_deltas {
            positive("cluster delta", d)?;
        }
        let model = self.model.build().map_err(|e| Error::Config(format!("model: {e}")))?;
        let s = model.tail_index().map_err(|e| Error::Config(format!("model: {e}")))?;
        let regime = match self.regime.forced() {
            None => Regime::from_s(s),
            Some(r) => r.check(s).map(|_| r),
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        Ok(ResolvedConfig { config: self.clone(), model, s, regime })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{"model": {"kind": "two_point_alpha", "alpha_a": 2.0, "alpha_b": 0.25, "w": 0.5}, "n_ladder": [1000]}"#
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::from_json(minimal()).unwrap();
        assert_eq!(c.replicas, ReplicaCounts::default());
        let r = c.validate().unwrap();
        assert_eq!(r.regime, Regime::Sub);
        assert!((r.s - 0.6942).abs() < 1e-3);
    }

    #[test]
    fn empty_ladder_is_rejected() {
        let mut c = ExperimentConfig::from_json(minimal()).unwrap();
        c.n_ladder.clear();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = minimal().replace("\"n_ladder\"", "\"bogus\": 1, \"n_ladder\"");
        assert!(matches!(ExperimentConfig::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn forced_regime_must_agree() {
        let mut c = ExperimentConfig::from_json(minimal()).unwrap();
        c.regime = RegimeChoice::Super;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.regime = RegimeChoice::Sub;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn shipped_models_have_their_indices() {
        let a = AcceptanceConfig::default();
        let s = |m: &ModelSpec| m.build().unwrap().tail_index().unwrap();
        assert!((s(&a.super_model) - 1.5).abs() < 1e-9);
        assert!((s(&a.gaussian_model) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }
}
