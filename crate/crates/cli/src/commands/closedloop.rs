//! `closedloop`: the standard 30-episode suite (10 seeds per
//! environment kind) for the full pipeline and the greedy
//! first-candidate baseline on shared seeds, reporting success rate,
//! time to collision, and delegation counts.

use crate::bench::{build_pool, PoolConfig};
use crate::commands::{decision_config, suite_cal_seed};
use crate::config::ExperimentConfig;
use crate::report::{RunDir, RunManifest};
use anyhow::Context;
use calpath_core::{
    calibrate, run_episode, EnvConfig, EnvKind, ExecutionPolicy, GeneratorConfig, MockScorer,
    MockScorerConfig, PipelineConfig, SafetyOracle,
};
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

pub const ENV_KINDS: [EnvKind; 3] = [EnvKind::Highway, EnvKind::Intersection, EnvKind::Roundabout];

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeRow {
    pub arm: String,
    pub env: String,
    pub seed: u64,
    pub success: bool,
    pub ttc: usize,
    pub hud_count: usize,
    pub decisions: usize,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedloopSummaryRow {
    pub arm: String,
    pub env: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_ttc: f64,
    pub hud_total: usize,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize)]
struct EpisodeDecisionRow {
    arm: String,
    env: String,
    seed: u64,
    #[serde(flatten)]
    record: calpath_core::DecisionRecord,
}

/// One full episode trace, tagged with its suite coordinates.
#[derive(Debug, Clone, Serialize)]
struct EpisodeLogRow {
    arm: String,
    env: String,
    seed: u64,
    #[serde(flatten)]
    log: calpath_core::EpisodeLog,
}

pub struct ClosedloopSummary {
    pub rows: Vec<EpisodeRow>,
    pub summary: Vec<ClosedloopSummaryRow>,
}

impl ClosedloopSummary {
    pub fn arm_success_rate(&self, arm: &str) -> f64 {
        let rows: Vec<&EpisodeRow> = self.rows.iter().filter(|r| r.arm == arm).collect();
        rows.iter().filter(|r| r.success).count() as f64 / rows.len() as f64
    }

    pub fn arm_mean_ttc(&self, arm: &str) -> f64 {
        let rows: Vec<&EpisodeRow> = self.rows.iter().filter(|r| r.arm == arm).collect();
        rows.iter().map(|r| r.ttc).sum::<usize>() as f64 / rows.len() as f64
    }
}

fn episode_seed(base: u64, kind_index: usize, episode: usize) -> u64 {
    base.wrapping_add(kind_index as u64 * 1_000_003)
        .wrapping_add(episode as u64)
}

pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<ClosedloopSummary> {
    cfg.validate()?;
    let started = Instant::now();
    let run = RunDir::create(out_dir)?;
    let alpha = cfg.alphas[0];
    let kind_cfg = cfg.score_config(cfg.score_kinds[0]);

    let cal_pool = build_pool(&PoolConfig::from_experiment(
        cfg,
        cfg.n_cal,
        suite_cal_seed(cfg.seeds[0]),
    ))?;
    let cal_scorer = cal_pool.scorer_from(&cfg.scorer);
    let records = cal_pool
        .calibration_records(&cal_scorer, &kind_cfg)
        .context("scoring closed-loop calibration pool")?;
    let threshold = calibrate(&records, alpha, kind_cfg)?;

    let sim_scorer = MockScorer::new(
        SafetyOracle::default(),
        MockScorerConfig {
            base_safe: cfg.scorer.base_safe,
            base_unsafe: cfg.scorer.base_unsafe,
            noise_scale: cfg.scorer.noise_scale,
        },
        cfg.scorer.seed,
    );

    let mut rows = Vec::new();
    let mut decision_rows = Vec::new();
    for (arm_name, policy) in [
        ("pipeline", ExecutionPolicy::Full),
        ("greedy", ExecutionPolicy::GreedyFirst),
    ] {
        for (kind_index, env_kind) in ENV_KINDS.into_iter().enumerate() {
            for episode in 0..cfg.env.episodes_per_kind {
                let seed = episode_seed(cfg.seeds[0], kind_index, episode);
                let env = EnvConfig {
                    kind: env_kind,
                    n_agents: cfg.env.n_agents,
                    frames: cfg.env.frames,
                    dt: cfg.env.dt,
                    seed,
                    replan_every: cfg.env.replan_every,
                };
                let pipeline = PipelineConfig {
                    generator: GeneratorConfig {
                        k: cfg.k,
                        seed: cfg.seeds[0],
                        maneuver_jitter: cfg.pool.maneuver_jitter,
                        backend: calpath_core::GeneratorBackend::Synthetic,
                    },
                    threshold: threshold.clone(),
                    decision: decision_config(cfg, cfg.autonomy_delta),
                    policy,
                };
                let log = run_episode(&env, &pipeline, &sim_scorer)
                    .with_context(|| format!("episode {arm_name}/{}/{seed}", env_kind.name()))?;
                for record in &log.decisions {
                    decision_rows.push(EpisodeDecisionRow {
                        arm: arm_name.to_string(),
                        env: env_kind.name().to_string(),
                        seed,
                        record: record.clone(),
                    });
                }
                log_rows.push(EpisodeLogRow {
                    arm: arm_name.to_string(),
                    env: env_kind.name().to_string(),
                    seed,
                    log: log.clone(),
                });
                rows.push(EpisodeRow {
                    arm: arm_name.to_string(),
                    env: env_kind.name().to_string(),
                    seed,
                    success: log.success,
                    ttc: log.time_to_collision(),
                    hud_count: log.hud_count,
                    decisions: log.decisions.len(),
                    config_hash: cfg.hash(),
                });
            }
        }
    }

    let mut summary = Vec::new();
    for arm in ["pipeline", "greedy"] {
        for env_kind in ENV_KINDS {
            let arm_rows: Vec<&EpisodeRow> = rows
                .iter()
                .filter(|r| r.arm == arm && r.env == env_kind.name())
                .collect();
            summary.push(ClosedloopSummaryRow {
                arm: arm.to_string(),
                env: env_kind.name().to_string(),
                episodes: arm_rows.len(),
                success_rate: arm_rows.iter().filter(|r| r.success).count() as f64
                    / arm_rows.len() as f64,
                mean_ttc: arm_rows.iter().map(|r| r.ttc).sum::<usize>() as f64
                    / arm_rows.len() as f64,
                hud_total: arm_rows.iter().map(|r| r.hud_count).sum(),
                config_hash: cfg.hash(),
            });
        }
    }

    run.write_json(
        "run.json",
        &RunManifest {
            command: "closedloop",
            config_hash: cfg.hash(),
            config: cfg,
        },
    )?;
    run.write_csv("episodes.csv", rows.iter().cloned())?;
    run.write_csv("closedloop_summary.csv", summary.iter().cloned())?;
    run.write_jsonl("decisions.jsonl", decision_rows.iter())?;
    let result = ClosedloopSummary { rows, summary };
    eprintln!(
        "closedloop: pipeline success {:.2} (ttc {:.1}) vs greedy {:.2} (ttc {:.1}), wall-clock {:.2?}",
        result.arm_success_rate("pipeline"),
        result.arm_mean_ttc("pipeline"),
        result.arm_success_rate("greedy"),
        result.arm_mean_ttc("greedy"),
        started.elapsed()
    );
    Ok(result)
}
