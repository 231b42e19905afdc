//! Stage 3: the path-decision policy over a calibrated prediction set.
//!
//! Case analysis: an empty set delegates to a human; a singleton is
//! adopted directly; a larger set is adopted through the configured
//! aggregation strategy only when every pair of members clears the
//! similarity threshold `delta`, and delegates otherwise.
//!
//! The singleton-only baseline policy ([`singleton_decide`]) acts only
//! on singleton sets and has neither a similarity gate nor aggregation.

use crate::conformal::PredictionSet;
use crate::generation::OptionLabel;
use crate::geom::Point2;
use crate::scene::{
    collision_fraction, min_pairwise_similarity, Scene, SimilarityConfig, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DecisionError {
    #[error("aggregation requires at least 2 members, got {got}")]
    TooFewMembers { got: usize },
    #[error("strategy needs per-option probabilities but none were recorded for {label}")]
    MissingProbability { label: OptionLabel },
    #[error("members have unequal lengths: {left} vs {right}")]
    UnequalLengths { left: usize, right: usize },
}

/// How to consolidate a delta-equivalent set into one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Member with the lowest expected collision fraction (default).
    MinCollision,
    /// Seeded uniform pick.
    RandomSample,
    /// Pointwise mean of member waypoints.
    Average,
    /// Pointwise mean weighted by member probabilities.
    ConformalWeightedAverage,
    /// Member with the highest probability.
    ConformalTopPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionConfig {
    /// Similarity gate: members must be pairwise at least this similar
    /// for autonomous selection.
    pub delta: f64,
    pub strategy: Strategy,
    pub seed: u64,
    pub similarity: SimilarityConfig,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        DecisionConfig {
            delta: 0.85,
            strategy: Strategy::MinCollision,
            seed: 0,
            similarity: SimilarityConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Adopt(Trajectory),
    Delegate,
}

impl Outcome {
    pub fn is_delegate(&self) -> bool {
        matches!(self, Outcome::Delegate)
    }

    pub fn adopted(&self) -> Option<&Trajectory> {
        match self {
            Outcome::Adopt(t) => Some(t),
            Outcome::Delegate => None,
        }
    }
}

/// What produced the outcome: set size, the similarity figure that was
/// gated on (when one was computed), and the adopted path's label and
/// expected collision fraction (when a path was adopted).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub set_size: usize,
    pub min_similarity: Option<f64>,
    pub chosen_label: Option<OptionLabel>,
    pub chosen_collision_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Outcome,
    pub evidence: Evidence,
}

impl Decision {
    fn delegate(set_size: usize, min_similarity: Option<f64>) -> Self {
        Decision {
            outcome: Outcome::Delegate,
            evidence: Evidence {
                set_size,
                min_similarity,
                chosen_label: None,
                chosen_collision_fraction: None,
            },
        }
    }
}

fn member_trajectories(set: &PredictionSet) -> Vec<Trajectory> {
    set.members
        .iter()
        .map(|(_, c)| c.trajectory.clone())
        .collect()
}

/// Lowest-collision member; ties break by option-label order (members
/// are stored in label order, so the first strict improvement wins).
fn min_collision_member(set: &PredictionSet, scene: &Scene) -> (OptionLabel, Trajectory, f64) {
    let mut best: Option<(OptionLabel, Trajectory, f64)> = None;
    for (label, candidate) in &set.members {
        let fraction = collision_fraction(&candidate.trajectory, scene);
        match &best {
            Some((_, _, best_fraction)) if fraction >= *best_fraction => {}
            _ => best = Some((*label, candidate.trajectory.clone(), fraction)),
        }
    }
    best.expect("caller guarantees a non-empty set")
}

fn check_equal_lengths(trajectories: &[Trajectory]) -> Result<(), DecisionError> {
    let first = trajectories[0].len();
    for t in trajectories.iter().skip(1) {
        if t.len() != first {
            return Err(DecisionError::UnequalLengths {
                left: first,
                right: t.len(),
            });
        }
    }
    Ok(())
}

fn weighted_average(
    trajectories: &[Trajectory],
    weights: &[f64],
) -> Result<Trajectory, DecisionError> {
    check_equal_lengths(trajectories)?;
    let total: f64 = weights.iter().sum();
    let len = trajectories[0].len();
    let mut points = vec![Point2::ORIGIN; len];
    for (trajectory, weight) in trajectories.iter().zip(weights) {
        for (i, p) in trajectory.points().iter().enumerate() {
            points[i] = points[i] + *p * (weight / total);
        }
    }
    Ok(Trajectory::new(points).expect("weighted mean of finite points is finite"))
}

/// Consolidate a set of at least two delta-equivalent members into one
/// trajectory under the given strategy. Callers run the similarity gate
/// first.
pub fn aggregate(
    set: &PredictionSet,
    scene: &Scene,
    strategy: Strategy,
    seed: u64,
) -> Result<Trajectory, DecisionError> {
    if set.len() < 2 {
        return Err(DecisionError::TooFewMembers { got: set.len() });
    }
    let trajectories = member_trajectories(set);
    match strategy {
        Strategy::MinCollision => Ok(min_collision_member(set, scene).1),
        Strategy::RandomSample => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let index = rng.random_range(0..trajectories.len());
            Ok(trajectories[index].clone())
        }
        Strategy::Average => {
            let weights = vec![1.0; trajectories.len()];
            weighted_average(&trajectories, &weights)
        }
        Strategy::ConformalWeightedAverage => {
            let weights = member_probabilities(set)?;
            weighted_average(&trajectories, &weights)
        }
        Strategy::ConformalTopPath => {
            let weights = member_probabilities(set)?;
            let mut best = 0;
            for (i, w) in weights.iter().enumerate() {
                if *w > weights[best] {
                    best = i;
                }
            }
            Ok(trajectories[best].clone())
        }
    }
}

fn member_probabilities(set: &PredictionSet) -> Result<Vec<f64>, DecisionError> {
    set.members
        .iter()
        .map(|(label, _)| {
            set.probabilities
                .get(label)
                .copied()
                .ok_or(DecisionError::MissingProbability { label: *label })
        })
        .collect()
}

/// The full decision policy over a prediction set. Deterministic for a
/// fixed seed; never fails (an aggregation problem falls back to the
/// lowest-collision member, as does an averaged trajectory that
/// collides when some member does not).
pub fn decide(set: &PredictionSet, scene: &Scene, cfg: &DecisionConfig) -> Decision {
    match set.len() {
        0 => Decision::delegate(0, None),
        1 => {
            let (label, candidate) = &set.members[0];
            let fraction = collision_fraction(&candidate.trajectory, scene);
            Decision {
                outcome: Outcome::Adopt(candidate.trajectory.clone()),
                evidence: Evidence {
                    set_size: 1,
                    min_similarity: None,
                    chosen_label: Some(*label),
                    chosen_collision_fraction: Some(fraction),
                },
            }
        }
        n => {
            let trajectories = member_trajectories(set);
            let min_sim = match min_pairwise_similarity(&trajectories, &cfg.similarity) {
                Ok(s) => s,
                Err(_) => return Decision::delegate(n, None),
            };
            if min_sim < cfg.delta {
                return Decision::delegate(n, Some(min_sim));
            }
            let (fallback_label, fallback_trajectory, fallback_fraction) =
                min_collision_member(set, scene);
            let adopted = match aggregate(set, scene, cfg.strategy, cfg.seed) {
                Ok(trajectory) => {
                    let averaged = matches!(
                        cfg.strategy,
                        Strategy::Average | Strategy::ConformalWeightedAverage
                    );
                    // An averaged path can cut a corner none of the
                    // members did; fall back when it collides and a
                    // member does not.
                    if averaged
                        && collision_fraction(&trajectory, scene) > 0.0
                        && fallback_fraction == 0.0
                    {
                        None
                    } else {
                        Some(trajectory)
                    }
                }
                Err(_) => None,
            };
            match adopted {
                Some(trajectory) => {
                    let fraction = collision_fraction(&trajectory, scene);
                    let label = set
                        .members
                        .iter()
                        .find(|(_, c)| c.trajectory == trajectory)
                        .map(|(l, _)| *l);
                    Decision {
                        outcome: Outcome::Adopt(trajectory),
                        evidence: Evidence {
                            set_size: n,
                            min_similarity: Some(min_sim),
                            chosen_label: label,
                            chosen_collision_fraction: Some(fraction),
                        },
                    }
                }
                None => Decision {
                    outcome: Outcome::Adopt(fallback_trajectory),
                    evidence: Evidence {
                        set_size: n,
                        min_similarity: Some(min_sim),
                        chosen_label: Some(fallback_label),
                        chosen_collision_fraction: Some(fallback_fraction),
                    },
                },
            }
        }
    }
}

/// Baseline policy that acts only when the set is a singleton and
/// delegates everything else. No similarity gate, no aggregation.
pub fn singleton_decide(set: &PredictionSet, scene: &Scene) -> Decision {
    match set.len() {
        1 => {
            let (label, candidate) = &set.members[0];
            Decision {
                outcome: Outcome::Adopt(candidate.trajectory.clone()),
                evidence: Evidence {
                    set_size: 1,
                    min_similarity: None,
                    chosen_label: Some(*label),
                    chosen_collision_fraction: Some(collision_fraction(
                        &candidate.trajectory,
                        scene,
                    )),
                },
            }
        }
        n => Decision::delegate(n, None),
    }
}

/// One line of the per-scenario decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub scenario_id: String,
    pub set_size: usize,
    pub min_similarity: Option<f64>,
    pub outcome: String,
    pub chosen_label: Option<char>,
    pub collision_fraction: Option<f64>,
}

impl DecisionRecord {
    pub fn from_decision(scenario_id: impl Into<String>, decision: &Decision) -> Self {
        DecisionRecord {
            scenario_id: scenario_id.into(),
            set_size: decision.evidence.set_size,
            min_similarity: decision.evidence.min_similarity,
            outcome: match decision.outcome {
                Outcome::Adopt(_) => "adopt".to_string(),
                Outcome::Delegate => "delegate".to_string(),
            },
            chosen_label: decision.evidence.chosen_label.map(|l| l.as_char()),
            collision_fraction: decision.evidence.chosen_collision_fraction,
        }
    }
}
