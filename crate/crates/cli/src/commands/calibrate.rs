//! `calibrate`: build the calibration pool, score it, and persist the
//! per-(alpha, kind) thresholds with full provenance.

use crate::adapter::{AdapterConfig, ExternalScorer, HttpTransport};
use crate::artifacts::{RecordRow, ThresholdArtifact, ThresholdEntry};
use crate::bench::{build_pool, BenchInstance, Pool, PoolConfig};
use crate::config::{BackendKind, ExperimentConfig};
use crate::report::{RunDir, RunManifest};
use anyhow::{anyhow, Context};
use calpath_core::{calibrate_scores, nonconformity, Scorer};
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

pub struct CalibrateSummary {
    pub artifact: ThresholdArtifact,
    pub records: usize,
}

const PARTIAL_FILE: &str = "records.partial.json";

#[derive(serde::Serialize, serde::Deserialize)]
struct PartialProgress {
    config_hash: String,
    rows: Vec<RecordRow>,
}

fn score_row(
    cfg: &ExperimentConfig,
    scorer: &dyn Scorer,
    bi: &BenchInstance,
) -> anyhow::Result<RecordRow> {
    let correct = bi
        .correct_label
        .ok_or_else(|| anyhow!("calibration pool must carry ground-truth labels"))?;
    let scored = scorer
        .score(&bi.instance)
        .with_context(|| format!("scoring calibration instance {}", bi.id))?;
    let mut scores = BTreeMap::new();
    for kind in &cfg.score_kinds {
        let s = nonconformity(&scored.probabilities, correct, &cfg.score_config(*kind))?;
        scores.insert(kind.to_string(), s);
    }
    Ok(RecordRow {
        id: bi.id,
        correct_label: correct,
        probabilities: scored.probabilities,
        scores,
    })
}

/// Score every instance. The mock backend fans out over a worker pool;
/// the external backend scores one request at a time (bounding the
/// in-flight count) and leaves a resumable partial-progress file if the
/// backend fails mid-run.
fn score_pool(cfg: &ExperimentConfig, pool: &Pool, run: &RunDir) -> anyhow::Result<Vec<RecordRow>> {
    match cfg.backend.kind {
        BackendKind::Mock => {
            let scorer = pool.scorer_from(&cfg.scorer);
            pool.instances
                .par_iter()
                .map(|bi| score_row(cfg, &scorer, bi))
                .collect()
        }
        BackendKind::External => {
            let api_key = std::env::var(&cfg.backend.credential_env).ok();
            let transport = HttpTransport::new(
                cfg.backend.endpoint_url.clone(),
                std::time::Duration::from_secs(cfg.backend.timeout_secs),
                api_key,
            )
            .map_err(|e| anyhow!("cannot build http transport: {e}"))?;
            let scorer = ExternalScorer {
                transport,
                cfg: AdapterConfig {
                    model_name: cfg.backend.model_name.clone(),
                    top_logprobs: cfg.backend.top_logprobs,
                    max_retries: cfg.backend.max_retries,
                    ..AdapterConfig::default()
                },
            };
            score_resumable(cfg, pool, run, &scorer)
        }
    }
}

/// Sequential scoring with resume support, shared by the external path
/// and its tests (which inject scripted scorers).
pub fn score_resumable(
    cfg: &ExperimentConfig,
    pool: &Pool,
    run: &RunDir,
    scorer: &dyn Scorer,
) -> anyhow::Result<Vec<RecordRow>> {
    let partial_path = run.path(PARTIAL_FILE);
    let mut rows: Vec<RecordRow> = Vec::new();
    if let Ok(text) = std::fs::read_to_string(&partial_path) {
        if let Ok(partial) = serde_json::from_str::<PartialProgress>(&text) {
            if partial.config_hash == cfg.hash() {
                eprintln!(
                    "calibrate: resuming from partial progress ({} of {} records)",
                    partial.rows.len(),
                    pool.instances.len()
                );
                rows = partial.rows;
            }
        }
    }
    let done: BTreeSet<u64> = rows.iter().map(|r| r.id).collect();
    for bi in &pool.instances {
        if done.contains(&bi.id) {
            continue;
        }
        match score_row(cfg, scorer, bi) {
            Ok(row) => rows.push(row),
            Err(e) => {
                let partial = PartialProgress {
                    config_hash: cfg.hash(),
                    rows,
                };
                run.write_json(PARTIAL_FILE, &partial)?;
                return Err(e.context(format!(
                    "backend failed; partial progress saved to {} (rerun to resume)",
                    partial_path.display()
                )));
            }
        }
    }
    rows.sort_by_key(|r| r.id);
    let _ = std::fs::remove_file(&partial_path);
    Ok(rows)
}

pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<CalibrateSummary> {
    cfg.validate()?;
    let started = Instant::now();
    let run = RunDir::create(out_dir)?;
    let pool_seed = cfg.seeds[0];
    let pool = build_pool(&PoolConfig::from_experiment(cfg, cfg.n_cal, pool_seed))?;
    let rows = score_pool(cfg, &pool, &run)?;

    let mut entries = Vec::new();
    for kind in &cfg.score_kinds {
        let name = kind.to_string();
        let scores: Vec<f64> = rows.iter().map(|r| r.scores[&name]).collect();
        for &alpha in &cfg.alphas {
            let threshold = calibrate_scores(&scores, alpha, cfg.score_config(*kind))?;
            entries.push(ThresholdEntry::from_threshold(&threshold));
        }
    }
    let artifact = ThresholdArtifact {
        config_hash: cfg.hash(),
        pool_seed,
        n_cal: cfg.n_cal,
        entries,
    };

    run.write_json(
        "run.json",
        &RunManifest {
            command: "calibrate",
            config_hash: cfg.hash(),
            config: cfg,
        },
    )?;
    run.write_jsonl("records.jsonl", rows.iter())?;
    run.write_json("thresholds.json", &artifact)?;
    eprintln!(
        "calibrate: {} records, {} thresholds, wall-clock {:.2?}",
        rows.len(),
        artifact.entries.len(),
        started.elapsed()
    );
    Ok(CalibrateSummary {
        artifact,
        records: rows.len(),
    })
}
