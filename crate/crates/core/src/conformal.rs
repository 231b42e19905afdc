//! Stage 2, back half: split-conformal calibration of the
//! non-conformity threshold, prediction-set construction, and the
//! coverage metrics.
//!
//! Calibration takes the `ceil((n + 1) * (1 - alpha))`-th smallest of
//! the `n` calibration scores. When that rank exceeds `n` the threshold
//! is `+inf` and every option enters the set (the conservative
//! convention). Membership is boundary-inclusive: `score <= q_hat`.
//! Under exchangeability of calibration and test draws, the set then
//! contains the correct option with probability at least `1 - alpha`.

use crate::generation::{CandidatePath, OptionLabel};
use crate::scene::Scene;
use crate::scoring::{nonconformity, McqaInstance, NonconformityConfig, ScoreError, Scorer};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConformalError {
    #[error("calibration set is empty")]
    EmptyCalibration,
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("calibration scores must be finite")]
    NonFiniteScore,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// One calibration example: an instance whose correct option is known
/// (the ground-truth, assumed-safe option) together with that option's
/// non-conformity score.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRecord {
    pub instance: McqaInstance,
    pub correct_label: OptionLabel,
    pub score: f64,
}

impl CalibrationRecord {
    pub fn new(instance: McqaInstance, correct_label: OptionLabel, score: f64) -> Self {
        CalibrationRecord {
            instance,
            correct_label,
            score,
        }
    }
}

/// The calibrated quantile together with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedThreshold {
    /// `ceil((n + 1)(1 - alpha))`-th smallest calibration score, or
    /// `+inf` when that rank exceeds `n`.
    pub q_hat: f64,
    pub alpha: f64,
    pub n: usize,
    pub score_kind: NonconformityConfig,
}

/// Calibrate from raw correct-option scores.
pub fn calibrate_scores(
    scores: &[f64],
    alpha: f64,
    score_kind: NonconformityConfig,
) -> Result<CalibratedThreshold, ConformalError> {
    if scores.is_empty() {
        return Err(ConformalError::EmptyCalibration);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ConformalError::InvalidAlpha(alpha));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(ConformalError::NonFiniteScore);
    }
    let n = scores.len();
    let rank = ((n as f64 + 1.0) * (1.0 - alpha)).ceil() as usize;
    let q_hat = if rank > n {
        f64::INFINITY
    } else {
        let mut sorted = scores.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
        sorted[rank - 1]
    };
    Ok(CalibratedThreshold {
        q_hat,
        alpha,
        n,
        score_kind,
    })
}

/// Calibrate from full records (scores must already match `score_kind`).
pub fn calibrate(
    records: &[CalibrationRecord],
    alpha: f64,
    score_kind: NonconformityConfig,
) -> Result<CalibratedThreshold, ConformalError> {
    let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
    calibrate_scores(&scores, alpha, score_kind)
}

/// The calibrated subset of options, with the per-option scores and
/// probabilities that produced it. An empty set is legal and triggers
/// delegation downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub members: Vec<(OptionLabel, CandidatePath)>,
    pub scores: BTreeMap<OptionLabel, f64>,
    pub probabilities: BTreeMap<OptionLabel, f64>,
    pub threshold: CalibratedThreshold,
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, label: OptionLabel) -> bool {
        self.members.iter().any(|(l, _)| *l == label)
    }

    pub fn member_labels(&self) -> Vec<OptionLabel> {
        self.members.iter().map(|(l, _)| *l).collect()
    }
}

/// Score every option of the instance and keep those at or below the
/// calibrated threshold. The non-conformity kind comes from the
/// threshold itself, so set membership always matches its calibration.
pub fn predict_set(
    instance: &McqaInstance,
    scorer: &dyn Scorer,
    threshold: &CalibratedThreshold,
) -> Result<PredictionSet, ScoreError> {
    let option_scores = scorer.score(instance)?;
    let mut scores = BTreeMap::new();
    for (label, _) in &instance.options {
        let s = nonconformity(&option_scores.probabilities, *label, &threshold.score_kind)?;
        scores.insert(*label, s);
    }
    let members = instance
        .options
        .iter()
        .filter(|(label, _)| scores[label] <= threshold.q_hat)
        .cloned()
        .collect();
    Ok(PredictionSet {
        members,
        scores,
        probabilities: option_scores.probabilities,
        threshold: threshold.clone(),
    })
}

/// Coverage metrics over a test pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpMetrics {
    /// Fraction of test instances whose correct option landed in the set.
    pub coverage: f64,
    /// Deviation from target coverage: `coverage - (1 - alpha)`.
    pub dtc: f64,
    /// Mean prediction-set size before any decision policy runs.
    pub avg_set_size: f64,
    /// Fraction of instances the decision policy delegated.
    pub hud_rate: f64,
}

impl CpMetrics {
    pub fn new(coverage: f64, alpha: f64, avg_set_size: f64, hud_rate: f64) -> Self {
        CpMetrics {
            coverage,
            dtc: coverage - (1.0 - alpha),
            avg_set_size,
            hud_rate,
        }
    }
}

/// Evaluate a calibrated threshold on a test pool disjoint from the
/// calibration pool. `is_delegate` is the decision policy's verdict for
/// each prediction set (true = delegate to a human).
pub fn evaluate_cp<F>(
    test: &[CalibrationRecord],
    scorer: &dyn Scorer,
    threshold: &CalibratedThreshold,
    mut is_delegate: F,
) -> Result<CpMetrics, ConformalError>
where
    F: FnMut(&PredictionSet, &Scene) -> bool,
{
    if test.is_empty() {
        return Err(ConformalError::EmptyTestSet);
    }
    let mut covered = 0usize;
    let mut total_size = 0usize;
    let mut delegated = 0usize;
    for record in test {
        let set = predict_set(&record.instance, scorer, threshold)?;
        if set.contains(record.correct_label) {
            covered += 1;
        }
        total_size += set.len();
        if is_delegate(&set, &record.instance.scene) {
            delegated += 1;
        }
    }
    let n = test.len() as f64;
    Ok(CpMetrics::new(
        covered as f64 / n,
        threshold.alpha,
        total_size as f64 / n,
        delegated as f64 / n,
    ))
}
