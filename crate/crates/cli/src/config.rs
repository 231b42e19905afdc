//! Experiment configuration: one TOML document (or defaults) drives
//! every command, and every report embeds the config hash so rows are
//! reproducible from (config, seeds) alone.

use calpath_core::{NonconformityConfig, NonconformityKind, Strategy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerMode {
    /// Base logits from the safety oracle's verdict per option.
    Safety,
    /// Base logits single out the reference option (a sharp scorer).
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSection {
    pub mode: ScorerMode,
    pub noise_scale: f64,
    pub base_safe: f64,
    pub base_unsafe: f64,
    pub seed: u64,
}

impl Default for ScorerSection {
    fn default() -> Self {
        ScorerSection {
            mode: ScorerMode::Safety,
            noise_scale: 1.0,
            base_safe: 2.0,
            base_unsafe: 0.0,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolSection {
    pub agents_min: usize,
    pub agents_max: usize,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Std-dev of the per-agent velocity error baked into predicted
    /// tracks (planning view) relative to actual motion, m/s.
    pub prediction_noise: f64,
    /// Clearance kept between placed agents and the reference path.
    pub reference_margin: f64,
    pub maneuver_jitter: f64,
    /// Scenes evaluated per seed in the stage-ablation suite.
    pub ablate_scenes: usize,
}

impl Default for PoolSection {
    fn default() -> Self {
        PoolSection {
            agents_min: 2,
            agents_max: 6,
            speed_min: 3.0,
            speed_max: 10.0,
            prediction_noise: 0.0,
            reference_margin: 0.5,
            maneuver_jitter: 0.3,
            ablate_scenes: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub n_agents: usize,
    pub frames: usize,
    pub dt: f64,
    pub replan_every: usize,
    pub episodes_per_kind: usize,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection {
            n_agents: 4,
            frames: 100,
            dt: 0.5,
            replan_every: 1,
            episodes_per_kind: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub endpoint_url: String,
    pub model_name: String,
    pub top_logprobs: usize,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// Name of the environment variable holding the API credential.
    /// The credential itself never lives in config or artifacts.
    pub credential_env: String,
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection {
            kind: BackendKind::Mock,
            endpoint_url: String::new(),
            model_name: String::new(),
            top_logprobs: 8,
            timeout_secs: 30,
            max_retries: 3,
            max_in_flight: 4,
            credential_env: "CALPATH_API_KEY".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alphas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub score_kinds: Vec<NonconformityKind>,
    pub strategy: Strategy,
    pub k: usize,
    pub seeds: Vec<u64>,
    pub n_cal: usize,
    pub n_test: usize,
    pub sigma: f64,
    pub raps_lambda: f64,
    pub raps_k_reg: usize,
    pub decision_seed: u64,
    /// Similarity gate used by the ablation and closed-loop suites;
    /// 0 is the full-autonomy operating point (only empty sets
    /// delegate). Delta sweeps use `deltas` instead.
    pub autonomy_delta: f64,
    pub scorer: ScorerSection,
    pub pool: PoolSection,
    pub env: EnvSection,
    pub backend: BackendSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            alphas: vec![0.1, 0.2, 0.3],
            deltas: vec![0.85],
            score_kinds: vec![NonconformityKind::Lac],
            strategy: Strategy::MinCollision,
            k: 4,
            seeds: vec![0],
            n_cal: 500,
            n_test: 1000,
            sigma: 2.0,
            raps_lambda: 0.1,
            raps_k_reg: 1,
            decision_seed: 0,
            autonomy_delta: 0.0,
            scorer: ScorerSection::default(),
            pool: PoolSection::default(),
            env: EnvSection::default(),
            backend: BackendSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: ExperimentConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_cal < 1 {
            return Err(ConfigError::Invalid("n_cal must be >= 1".into()));
        }
        if self.k < 2 {
            return Err(ConfigError::Invalid("k must be >= 2".into()));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(ConfigError::Invalid(
                "alphas must be non-empty and inside (0, 1)".into(),
            ));
        }
        if self.deltas.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(ConfigError::Invalid("deltas must lie in [0, 1]".into()));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("seeds must be non-empty".into()));
        }
        if self.score_kinds.is_empty() {
            return Err(ConfigError::Invalid("score_kinds must be non-empty".into()));
        }
        Ok(())
    }

    pub fn score_config(&self, kind: NonconformityKind) -> NonconformityConfig {
        match kind {
            NonconformityKind::Raps => NonconformityConfig::raps(self.raps_lambda, self.raps_k_reg),
            other => NonconformityConfig::of_kind(other),
        }
    }

    /// Standard coverage suite: three score kinds, the default alpha
    /// grid, a moderately noisy safety scorer.
    pub fn coverage_suite() -> Self {
        ExperimentConfig {
            alphas: vec![0.1, 0.2, 0.3],
            score_kinds: vec![
                NonconformityKind::Lac,
                NonconformityKind::Aps,
                NonconformityKind::Raps,
            ],
            n_cal: 500,
            n_test: 1000,
            ..ExperimentConfig::default()
        }
    }

    /// Standard stage-ablation suite: 50 seeds of 40 unprotected
    /// scenes, imperfect agent predictions, a fairly sharp scorer.
    /// Prediction error is what separates the arms; with perfect
    /// predictions the collision argmin alone would already be optimal.
    pub fn ablation_suite() -> Self {
        ExperimentConfig {
            alphas: vec![0.3],
            seeds: (0..50).collect(),
            n_cal: 300,
            pool: PoolSection {
                prediction_noise: 0.6,
                ablate_scenes: 40,
                ..PoolSection::default()
            },
            scorer: ScorerSection {
                noise_scale: 0.5,
                ..ScorerSection::default()
            },
            ..ExperimentConfig::default()
        }
    }

    /// Standard closed-loop suite: 10 episodes per environment kind,
    /// shared seeds across arms, a noiseless scorer.
    pub fn closedloop_suite() -> Self {
        ExperimentConfig {
            alphas: vec![0.1],
            n_cal: 300,
            scorer: ScorerSection {
                noise_scale: 0.0,
                ..ScorerSection::default()
            },
            ..ExperimentConfig::default()
        }
    }

    /// Stable hex digest of the resolved config; embedded in every
    /// report so rows trace back to the exact inputs.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}
