use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rwre_core::config::{ExperimentConfig, ResolvedConfig};
use rwre_core::occupancy::{log_levels, sample_z, tail_from_draws};
use rwre_core::seeds::{derive_seed, domain};
use rwre_core::stats::quantile;
use rwre_core::verify::CriterionReport;
use rwre_core::walk::Regime;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Hash of everything that can change the results; worker count and output
/// root are left out.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.workers = None;
    c.out_dir = PathBuf::new();
    let text = serde_json::to_string(&c).expect("config serialises");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// `<out>/<hash>/`, created if missing.
pub fn run_dir(config: &ExperimentConfig) -> Result<(PathBuf, String), CliError> {
    let hash = config_hash(config);
    let dir = config.out_dir.join(&hash);
    fs::create_dir_all(&dir)?;
    Ok((dir, hash))
}

#[derive(Debug, Clone, Serialize)]
pub struct TailSummary {
    pub level: f64,
    pub c_hat: f64,
    pub c_star_hat: f64,
    pub mean_p_pow: f64,
    pub draws: usize,
}

/// `c_hat` and `c_star_hat` at the middle of the calibrated tail range.
pub fn tail_summary(r: &ResolvedConfig) -> Option<TailSummary> {
    let draws = 1_000_000;
    let z = sample_z(&r.model, draws, derive_seed(r.config.seed, domain::CALIBRATION, 0));
    let mut zs: Vec<f64> = z.iter().map(|d| d.1).collect();
    zs.sort_by(f64::total_cmp);
    let (lo, hi) = (quantile(&zs, 0.99), zs[zs.len() - 501]);
    if hi <= lo {
        return None;
    }
    let levels = log_levels(lo, hi, 9);
    match tail_from_draws(&z, r.s, &levels) {
        Ok(est) => Some(TailSummary {
            level: est.levels[4],
            c_hat: est.c_hat[4],
            c_star_hat: est.c_star_hat[4],
            mean_p_pow: est.mean_p_pow,
            draws,
        }),
        Err(e) => {
            log::warn!("tail constants unavailable: {e}");
            None
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub rwre_core: &'static str,
    pub rwre_cli: &'static str,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub s: f64,
    pub regime: Regime,
    pub tail: Option<TailSummary>,
    pub versions: Versions,
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub reports: Vec<CriterionReport>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &'static str, r: &ResolvedConfig, hash: String) -> Self {
        RunManifest {
            command,
            config_hash: hash,
            config: r.config.clone(),
            s: r.s,
            regime: r.regime,
            tail: None,
            versions: Versions { rwre_core: rwre_core::VERSION, rwre_cli: env!("CARGO_PKG_VERSION") },
            files: Vec::new(),
            reports: Vec::new(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_clock_seconds: 0.0,
        }
    }

    /// Store under this command's key in `manifest.json`, keeping the
    /// entries of other commands run on the same config.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join("manifest.json");
        let mut root = match fs::read_to_string(&path) {
            Ok(text) => match serde_json::from_str(&text)? {
                serde_json::Value::Object(m) => m,
                _ => serde_json::Map::new(),
            },
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => serde_json::Map::new(),
            Err(e) => return Err(e.into()),
        };
        root.insert(self.command.to_string(), serde_json::to_value(self)?);
        fs::write(path, serde_json::to_string_pretty(&root)?)?;
        Ok(())
    }
}
