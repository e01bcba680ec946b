//! Run configuration: one self-contained file per analysis, with
//! command-line flags taking precedence over file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltv::DEFAULT_EXACT_CAP;
use crate::metrics::CorWeighting;
use crate::policy_opt::ObjectiveWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantChoice {
    Risky,
    Conservative,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightsConfig {
    #[serde(default)]
    pub alpha_poi: f64,
    #[serde(default)]
    pub alpha_sl: f64,
    #[serde(default)]
    pub alpha_cor: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self {
            alpha_poi: 0.0,
            alpha_sl: 0.0,
            alpha_cor: 0.0,
        }
    }
}

impl WeightsConfig {
    pub fn to_weights(self) -> ObjectiveWeights {
        ObjectiveWeights::new(self.alpha_poi, self.alpha_sl, self.alpha_cor)
    }
}

/// Direct-policy analysis parameters: the fixed honey link and how far to
/// run the exact trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectConfig {
    pub initial: String,
    pub honeypot: String,
    #[serde(default = "default_horizon_cap")]
    pub horizon_cap: usize,
}

/// Indirect-policy analysis parameters: deterrence schedule grid and the
/// horizon at which limits are probed numerically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndirectConfig {
    pub initial: Option<String>,
    #[serde(default = "default_grid")]
    pub m: Vec<f64>,
    #[serde(default = "default_grid")]
    pub n: Vec<f64>,
    #[serde(default = "default_limit_horizon")]
    pub delta_k_max: usize,
    #[serde(default = "default_horizon_cap")]
    pub horizon_cap: usize,
}

fn default_horizon_cap() -> usize {
    10
}

fn default_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_limit_horizon() -> usize {
    100_000
}

fn default_delta_k() -> usize {
    4
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_max_iter() -> usize {
    200
}

fn default_trials() -> u64 {
    100_000
}

fn default_level() -> f64 {
    0.95
}

fn default_exact_cap() -> usize {
    DEFAULT_EXACT_CAP
}

fn default_window_seconds() -> f64 {
    3600.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Network description file (JSON).
    pub network: PathBuf,
    /// Honeypot policy file (JSON matrix); defaults depend on the
    /// subcommand.
    #[serde(default)]
    pub policy: Option<PathBuf>,
    /// Cost table file (JSON); absent means zero cost.
    #[serde(default)]
    pub costs: Option<PathBuf>,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default = "default_delta_k")]
    pub delta_k: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_exact_cap")]
    pub exact_cap: usize,
    #[serde(default)]
    pub cor_weighting: CorWeighting,
    #[serde(default = "default_window_seconds")]
    pub window_seconds: f64,
    /// Authentication log (CSV `time,source,destination`) for the beta
    /// estimator.
    #[serde(default)]
    pub auth_log: Option<PathBuf>,
    #[serde(default)]
    pub direct: Option<DirectConfig>,
    #[serde(default)]
    pub indirect: Option<IndirectConfig>,
    /// Output path; stdout when absent.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub bounds_only: bool,
    #[serde(default)]
    pub variant: VariantChoice,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("config field `{field}`: {problem}")]
    BadField {
        field: &'static str,
        problem: String,
    },
}

/// Flag-level overrides; every set field wins over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub policy: Option<PathBuf>,
    pub delta_k: Option<usize>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub variant: Option<VariantChoice>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub window_seconds: Option<f64>,
    pub bounds_only: bool,
}

impl RunConfig {
    /// Loads the file, resolves relative paths against its directory, and
    /// applies overrides.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        resolve(&mut config.network);
        if let Some(p) = config.policy.as_mut() {
            resolve(p);
        }
        if let Some(p) = config.costs.as_mut() {
            resolve(p);
        }
        if let Some(p) = config.auth_log.as_mut() {
            resolve(p);
        }
        // `out` is relative to the invocation directory, not the config.

        if let Some(p) = overrides.policy.clone() {
            config.policy = Some(p);
        }
        if let Some(d) = overrides.delta_k {
            config.delta_k = d;
        }
        if let Some(t) = overrides.trials {
            config.trials = t;
        }
        if let Some(s) = overrides.seed {
            config.seed = s;
        }
        if let Some(v) = overrides.variant {
            config.variant = v;
        }
        if let Some(o) = overrides.out.clone() {
            config.out = Some(o);
        }
        if let Some(f) = overrides.format {
            config.format = f;
        }
        if let Some(w) = overrides.window_seconds {
            config.window_seconds = w;
        }
        if overrides.bounds_only {
            config.bounds_only = true;
        }
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let bad = |field: &'static str, problem: String| ConfigError::BadField { field, problem };
        if self.epsilon <= 0.0 {
            return Err(bad("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if self.max_iter == 0 {
            return Err(bad("max_iter", "must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(bad("trials", "must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(bad("level", format!("must be in (0,1), got {}", self.level)));
        }
        if self.window_seconds <= 0.0 {
            return Err(bad(
                "window_seconds",
                format!("must be positive, got {}", self.window_seconds),
            ));
        }
        if self.weights.alpha_poi < 0.0 || self.weights.alpha_sl < 0.0 || self.weights.alpha_cor < 0.0
        {
            return Err(bad("weights", "alphas must be nonnegative".into()));
        }
        Ok(())
    }
}
