//! The experiment commands. Each is a pure function of (config, seeds)
//! that writes its artifacts into a run directory; rerunning with the
//! same inputs reproduces the same bytes.

pub mod ablate;
pub mod calibrate;
pub mod closedloop;
pub mod evaluate;
pub mod report;
pub mod sweep;

use crate::config::ExperimentConfig;
use calpath_core::{DecisionConfig, SimilarityConfig};

/// Test pools draw from a seed stream disjoint from calibration pools.
pub(crate) fn test_pool_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Calibration pools for suites that also build per-seed test pools.
pub(crate) fn suite_cal_seed(seed: u64) -> u64 {
    seed ^ 0x5851_f42d_4c95_7f2d
}

pub(crate) fn decision_config(cfg: &ExperimentConfig, delta: f64) -> DecisionConfig {
    DecisionConfig {
        delta,
        strategy: cfg.strategy,
        seed: cfg.decision_seed,
        similarity: SimilarityConfig { sigma: cfg.sigma },
    }
}
