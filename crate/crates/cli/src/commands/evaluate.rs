//! `evaluate`: coverage, deviation from target, set sizes, and
//! delegation rates over a held-out test pool, for each configured
//! alpha, score kind, and decision policy.

use crate::artifacts::{InstanceRow, ThresholdArtifact};
use crate::bench::{build_pool, PoolConfig};
use crate::commands::{decision_config, test_pool_seed};
use crate::config::ExperimentConfig;
use crate::report::{RunDir, RunManifest};
use anyhow::{anyhow, Context};
use calpath_core::{predict_set, singleton_decide, Decision, PredictionSet};
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub alpha: f64,
    pub score_kind: String,
    pub policy: String,
    pub delta: String,
    pub coverage: f64,
    pub dtc: f64,
    pub avg_set_size: f64,
    pub effective_set_size: f64,
    pub hud_rate: f64,
    pub config_hash: String,
}

#[derive(Debug)]
pub struct EvaluateSummary {
    pub rows: Vec<MetricsRow>,
}

fn effective_size(decision: &Decision, set: &PredictionSet) -> f64 {
    if decision.outcome.is_delegate() {
        set.len() as f64
    } else {
        1.0
    }
}

pub fn run(
    cfg: &ExperimentConfig,
    thresholds_path: &Path,
    out_dir: &Path,
) -> anyhow::Result<EvaluateSummary> {
    cfg.validate()?;
    let started = Instant::now();
    let artifact = ThresholdArtifact::load(thresholds_path).map_err(|e| {
        anyhow!(
            "cannot load thresholds from {}: {e}; run `calpath calibrate` first",
            thresholds_path.display()
        )
    })?;
    if artifact.config_hash != cfg.hash() {
        eprintln!(
            "evaluate: thresholds were calibrated under config {} (current {})",
            artifact.config_hash,
            cfg.hash()
        );
    }
    let run = RunDir::create(out_dir)?;
    let pool = build_pool(&PoolConfig::from_experiment(
        cfg,
        cfg.n_test,
        test_pool_seed(cfg.seeds[0]),
    ))?;
    let scorer = pool.scorer_from(&cfg.scorer);

    let mut rows = Vec::new();
    let mut instance_rows = Vec::new();
    for kind in &cfg.score_kinds {
        for &alpha in &cfg.alphas {
            let threshold = artifact.find(alpha, *kind).ok_or_else(|| {
                anyhow!(
                    "no threshold for alpha={alpha} kind={kind}; run `calpath calibrate` \
                     with matching alphas and score_kinds"
                )
            })?;
            let sets: Vec<PredictionSet> = pool
                .instances
                .par_iter()
                .map(|bi| predict_set(&bi.instance, &scorer, &threshold))
                .collect::<Result<_, _>>()
                .context("scoring test pool")?;

            let n = sets.len() as f64;
            let mut covered = 0usize;
            let mut total_size = 0usize;
            for (bi, set) in pool.instances.iter().zip(&sets) {
                let correct = bi
                    .correct_label
                    .ok_or_else(|| anyhow!("test pool must carry ground-truth labels"))?;
                let is_covered = set.contains(correct);
                covered += is_covered as usize;
                total_size += set.len();
                instance_rows.push(InstanceRow {
                    id: bi.id,
                    alpha,
                    kind: *kind,
                    correct_label: correct,
                    member_labels: set.member_labels(),
                    covered: is_covered,
                    set_size: set.len(),
                });
            }
            let coverage = covered as f64 / n;
            let avg_set_size = total_size as f64 / n;

            // Singleton-only baseline policy: acts only on |C| = 1.
            let mut hud = 0usize;
            let mut effective = 0.0;
            for (bi, set) in pool.instances.iter().zip(&sets) {
                let decision = singleton_decide(set, &bi.instance.scene);
                hud += decision.outcome.is_delegate() as usize;
                effective += effective_size(&decision, set);
            }
            rows.push(MetricsRow {
                alpha,
                score_kind: kind.to_string(),
                policy: "singleton".into(),
                delta: "-".into(),
                coverage,
                dtc: coverage - (1.0 - alpha),
                avg_set_size,
                effective_set_size: effective / n,
                hud_rate: hud as f64 / n,
                config_hash: cfg.hash(),
            });

            // Similarity-gated policy at each configured delta.
            for &delta in &cfg.deltas {
                let dc = decision_config(cfg, delta);
                let mut hud = 0usize;
                let mut effective = 0.0;
                for (bi, set) in pool.instances.iter().zip(&sets) {
                    let decision = calpath_core::decide(set, &bi.instance.scene, &dc);
                    hud += decision.outcome.is_delegate() as usize;
                    effective += effective_size(&decision, set);
                }
                rows.push(MetricsRow {
                    alpha,
                    score_kind: kind.to_string(),
                    policy: "gated".into(),
                    delta: format!("{delta}"),
                    coverage,
                    dtc: coverage - (1.0 - alpha),
                    avg_set_size,
                    effective_set_size: effective / n,
                    hud_rate: hud as f64 / n,
                    config_hash: cfg.hash(),
                });
            }
        }
    }

    run.write_json(
        "run.json",
        &RunManifest {
            command: "evaluate",
            config_hash: cfg.hash(),
            config: cfg,
        },
    )?;
    run.write_csv("metrics.csv", rows.iter().cloned())?;
    run.write_jsonl("instances.jsonl", instance_rows.iter())?;
    eprintln!(
        "evaluate: {} metric rows over {} instances, wall-clock {:.2?}",
        rows.len(),
        pool.instances.len(),
        started.elapsed()
    );
    Ok(EvaluateSummary { rows })
}
