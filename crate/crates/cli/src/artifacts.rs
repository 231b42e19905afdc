//! On-disk artifact schemas shared between commands: the threshold
//! store produced by `calibrate` and consumed by `evaluate`, and the
//! per-instance record rows both emit.

use calpath_core::{CalibratedThreshold, NonconformityConfig, NonconformityKind, OptionLabel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// One calibrated threshold with full provenance. `q_hat = None`
/// encodes the rank-overflow case (+inf), which JSON cannot carry as a
/// number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub alpha: f64,
    pub kind: NonconformityKind,
    pub raps_lambda: f64,
    pub raps_k_reg: usize,
    pub n: usize,
    pub q_hat: Option<f64>,
}

impl ThresholdEntry {
    pub fn from_threshold(t: &CalibratedThreshold) -> Self {
        ThresholdEntry {
            alpha: t.alpha,
            kind: t.score_kind.kind,
            raps_lambda: t.score_kind.raps_lambda,
            raps_k_reg: t.score_kind.raps_k_reg,
            n: t.n,
            q_hat: t.q_hat.is_finite().then_some(t.q_hat),
        }
    }

    pub fn to_threshold(&self) -> CalibratedThreshold {
        let mut score_kind = match self.kind {
            NonconformityKind::Raps => NonconformityConfig::raps(self.raps_lambda, self.raps_k_reg),
            other => NonconformityConfig::of_kind(other),
        };
        score_kind.raps_lambda = self.raps_lambda;
        score_kind.raps_k_reg = self.raps_k_reg;
        CalibratedThreshold {
            q_hat: self.q_hat.unwrap_or(f64::INFINITY),
            alpha: self.alpha,
            n: self.n,
            score_kind,
        }
    }
}

/// The `thresholds.json` artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdArtifact {
    pub config_hash: String,
    pub pool_seed: u64,
    pub n_cal: usize,
    pub entries: Vec<ThresholdEntry>,
}

impl ThresholdArtifact {
    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    pub fn find(&self, alpha: f64, kind: NonconformityKind) -> Option<CalibratedThreshold> {
        self.entries
            .iter()
            .find(|e| e.kind == kind && (e.alpha - alpha).abs() < 1e-12)
            .map(ThresholdEntry::to_threshold)
    }
}

/// One scored calibration instance, enough to recompute every
/// threshold offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub id: u64,
    pub correct_label: OptionLabel,
    pub probabilities: BTreeMap<OptionLabel, f64>,
    /// Correct-option non-conformity score per kind name.
    pub scores: BTreeMap<String, f64>,
}

/// One evaluated test instance: the prediction-set membership evidence
/// behind the coverage numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub id: u64,
    pub alpha: f64,
    pub kind: NonconformityKind,
    pub correct_label: OptionLabel,
    pub member_labels: Vec<OptionLabel>,
    pub covered: bool,
    pub set_size: usize,
}
