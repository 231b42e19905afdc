//! `sweep-delta`: the human-delegation rate as a function of the
//! similarity threshold, per alpha. Prediction sets do not depend on
//! delta, so for fixed sets the rate must be non-decreasing in delta;
//! a non-monotone result indicates a similarity or gate bug and fails
//! the command.

use crate::bench::{build_pool, PoolConfig};
use crate::commands::{decision_config, test_pool_seed};
use crate::config::ExperimentConfig;
use crate::report::{RunDir, RunManifest};
use anyhow::{anyhow, Context};
use calpath_core::{calibrate_scores, decide, predict_set, PredictionSet};
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub delta: f64,
    pub hud_rate: f64,
    pub avg_set_size: f64,
    pub config_hash: String,
}

pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
}

pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<SweepSummary> {
    cfg.validate()?;
    let started = Instant::now();
    let run = RunDir::create(out_dir)?;
    let kind = cfg.score_kinds[0];
    let kind_cfg = cfg.score_config(kind);

    let cal_pool = build_pool(&PoolConfig::from_experiment(cfg, cfg.n_cal, cfg.seeds[0]))?;
    let cal_scorer = cal_pool.scorer_from(&cfg.scorer);
    let cal_records = cal_pool
        .calibration_records(&cal_scorer, &kind_cfg)
        .context("scoring calibration pool")?;
    let cal_scores: Vec<f64> = cal_records.iter().map(|r| r.score).collect();

    let test_pool = build_pool(&PoolConfig::from_experiment(
        cfg,
        cfg.n_test,
        test_pool_seed(cfg.seeds[0]),
    ))?;
    let scorer = test_pool.scorer_from(&cfg.scorer);

    let mut deltas = cfg.deltas.clone();
    deltas.sort_by(|a, b| a.partial_cmp(b).expect("deltas are finite"));

    let mut rows = Vec::new();
    for &alpha in &cfg.alphas {
        let threshold = calibrate_scores(&cal_scores, alpha, kind_cfg)?;
        let sets: Vec<PredictionSet> = test_pool
            .instances
            .par_iter()
            .map(|bi| predict_set(&bi.instance, &scorer, &threshold))
            .collect::<Result<_, _>>()
            .context("scoring test pool")?;
        let n = sets.len() as f64;
        let avg_set_size = sets.iter().map(|s| s.len()).sum::<usize>() as f64 / n;

        let mut last_hud = -1.0;
        for &delta in &deltas {
            let dc = decision_config(cfg, delta);
            let delegated = test_pool
                .instances
                .iter()
                .zip(&sets)
                .filter(|(bi, set)| decide(set, &bi.instance.scene, &dc).outcome.is_delegate())
                .count();
            let hud_rate = delegated as f64 / n;
            if hud_rate < last_hud {
                return Err(anyhow!(
                    "delegation rate decreased from {last_hud} to {hud_rate} at \
                     alpha={alpha}, delta={delta}: similarity gate violated monotonicity"
                ));
            }
            last_hud = hud_rate;
            rows.push(SweepRow {
                alpha,
                delta,
                hud_rate,
                avg_set_size,
                config_hash: cfg.hash(),
            });
        }
    }

    run.write_json(
        "run.json",
        &RunManifest {
            command: "sweep-delta",
            config_hash: cfg.hash(),
            config: cfg,
        },
    )?;
    run.write_csv("sweep.csv", rows.iter().cloned())?;
    eprintln!(
        "sweep-delta: {} rows, wall-clock {:.2?}",
        rows.len(),
        started.elapsed()
    );
    Ok(SweepSummary { rows })
}
