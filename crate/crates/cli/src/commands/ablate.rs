//! `ablate`: oracle-judged collision rates for three pipelines on
//! identical seeds — the first candidate alone (stage 1), the decision
//! stage over the full candidate set (stages 1+3), and the full
//! pipeline with the calibrated filter in between (stages 1+2+3).
//!
//! The planning view carries seeded prediction error relative to the
//! actual agent motion, so the decision stage's collision estimates are
//! imperfect while the scorer's safety signal reflects actual motion.
//! That is the regime where each added stage pays for itself; with
//! perfect predictions an argmin over all candidates would already be
//! optimal and the ordering would collapse.

use crate::bench::{build_pool, PoolConfig};
use crate::commands::{decision_config, suite_cal_seed};
use crate::config::ExperimentConfig;
use crate::report::{RunDir, RunManifest};
use crate::stats::{mean, paired_t_less};
use anyhow::Context;
use calpath_core::{calibrate, collision_fraction, decide, predict_set, DecisionRecord};
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

pub const ARMS: [&str; 3] = ["stage1", "stages13", "full"];

#[derive(Debug, Clone, Serialize)]
pub struct AblateSeedRow {
    pub seed: u64,
    pub arm: String,
    pub scenes: usize,
    pub collision_rate: f64,
    pub delegations: usize,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblateSummaryRow {
    pub comparison: String,
    pub mean_lhs: f64,
    pub mean_rhs: f64,
    pub t: f64,
    pub p_one_sided: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize)]
struct AblateDecisionRow {
    seed: u64,
    arm: String,
    #[serde(flatten)]
    record: DecisionRecord,
    eval_collided: bool,
}

pub struct AblateSummary {
    pub mean_rates: [f64; 3],
    pub p_stages13_lt_stage1: f64,
    pub p_full_lt_stages13: f64,
    pub seed_rows: Vec<AblateSeedRow>,
}

pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<AblateSummary> {
    cfg.validate()?;
    let started = Instant::now();
    let run = RunDir::create(out_dir)?;
    let alpha = cfg.alphas[0];
    let kind_cfg = cfg.score_config(cfg.score_kinds[0]);

    // One calibrated threshold, shared by every seed's full arm.
    let cal_pool = build_pool(&PoolConfig::from_experiment(
        cfg,
        cfg.n_cal,
        suite_cal_seed(cfg.seeds[0]),
    ))?;
    let cal_scorer = cal_pool.scorer_from(&cfg.scorer);
    let records = cal_pool
        .calibration_records(&cal_scorer, &kind_cfg)
        .context("scoring ablation calibration pool")?;
    let threshold = calibrate(&records, alpha, kind_cfg)?;
    let mut unfiltered = threshold.clone();
    unfiltered.q_hat = f64::INFINITY;

    let dc = decision_config(cfg, cfg.autonomy_delta);
    let mut seed_rows = Vec::new();
    let mut decision_rows = Vec::new();
    let mut rates: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];

    for &seed in &cfg.seeds {
        let pool_cfg = PoolConfig {
            protect_reference: false,
            inject_ground_truth: false,
            ..PoolConfig::from_experiment(cfg, cfg.pool.ablate_scenes, seed)
        };
        let pool = build_pool(&pool_cfg)?;
        let scorer = pool.scorer_from(&cfg.scorer);

        let mut collisions = [0usize; 3];
        let mut delegations = [0usize; 3];
        for bi in &pool.instances {
            let thresholds = [None, Some(&unfiltered), Some(&threshold)];
            for (arm_index, arm_threshold) in thresholds.into_iter().enumerate() {
                let decision = match arm_threshold {
                    None => {
                        // Stage 1 only: the generator's first candidate.
                        let first = &bi.instance.options[0].1;
                        calpath_core::Decision {
                            outcome: calpath_core::Outcome::Adopt(first.trajectory.clone()),
                            evidence: calpath_core::Evidence {
                                set_size: bi.instance.options.len(),
                                min_similarity: None,
                                chosen_label: first.label,
                                chosen_collision_fraction: Some(collision_fraction(
                                    &first.trajectory,
                                    &bi.instance.scene,
                                )),
                            },
                        }
                    }
                    Some(t) => {
                        let set = predict_set(&bi.instance, &scorer, t)?;
                        decide(&set, &bi.instance.scene, &dc)
                    }
                };
                let collided = match decision.outcome.adopted() {
                    Some(trajectory) => collision_fraction(trajectory, &bi.eval_scene) > 0.0,
                    // Delegation hands control to a human, counted safe.
                    None => false,
                };
                collisions[arm_index] += collided as usize;
                delegations[arm_index] += decision.outcome.is_delegate() as usize;
                decision_rows.push(AblateDecisionRow {
                    seed,
                    arm: ARMS[arm_index].to_string(),
                    record: DecisionRecord::from_decision(format!("scene-{}", bi.id), &decision),
                    eval_collided: collided,
                });
            }
        }
        let n = pool.instances.len();
        for arm_index in 0..3 {
            let rate = collisions[arm_index] as f64 / n as f64;
            rates[arm_index].push(rate);
            seed_rows.push(AblateSeedRow {
                seed,
                arm: ARMS[arm_index].to_string(),
                scenes: n,
                collision_rate: rate,
                delegations: delegations[arm_index],
                config_hash: cfg.hash(),
            });
        }
    }

    let t13 = paired_t_less(&rates[1], &rates[0]);
    let tfull = paired_t_less(&rates[2], &rates[1]);
    let summary_rows = [
        AblateSummaryRow {
            comparison: "stages13 < stage1".into(),
            mean_lhs: mean(&rates[1]),
            mean_rhs: mean(&rates[0]),
            t: t13.t,
            p_one_sided: t13.p_less,
            config_hash: cfg.hash(),
        },
        AblateSummaryRow {
            comparison: "full < stages13".into(),
            mean_lhs: mean(&rates[2]),
            mean_rhs: mean(&rates[1]),
            t: tfull.t,
            p_one_sided: tfull.p_less,
            config_hash: cfg.hash(),
        },
    ];

    run.write_json(
        "run.json",
        &RunManifest {
            command: "ablate",
            config_hash: cfg.hash(),
            config: cfg,
        },
    )?;
    run.write_csv("ablation.csv", seed_rows.iter().cloned())?;
    run.write_csv("ablation_summary.csv", summary_rows.iter().cloned())?;
    run.write_jsonl("decisions.jsonl", decision_rows.iter())?;
    eprintln!(
        "ablate: rates stage1={:.4} stages13={:.4} full={:.4}, p13={:.2e}, pfull={:.2e}, wall-clock {:.2?}",
        mean(&rates[0]),
        mean(&rates[1]),
        mean(&rates[2]),
        t13.p_less,
        tfull.p_less,
        started.elapsed()
    );
    Ok(AblateSummary {
        mean_rates: [mean(&rates[0]), mean(&rates[1]), mean(&rates[2])],
        p_stages13_lt_stage1: t13.p_less,
        p_full_lt_stages13: tfull.p_less,
        seed_rows,
    })
}
