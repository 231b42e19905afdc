//! Split-based coverage experiments over one exchangeable pool: score
//! every instance once, then re-partition into calibration/test many
//! times. Used by the verification suites; the commands expose the
//! single-split versions.

use crate::bench::{BenchInstance, Pool};
use calpath_core::{
    calibrate_scores, decide, nonconformity, singleton_decide, CalibratedThreshold, Decision,
    DecisionConfig, NonconformityConfig, OptionLabel, PredictionSet, ScoreError, Scorer,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Per-instance scoring artifacts, computed once per pool.
#[derive(Debug, Clone)]
pub struct ScoredInstance {
    pub correct: OptionLabel,
    pub probabilities: BTreeMap<OptionLabel, f64>,
    /// Non-conformity per option, one map per score kind.
    pub option_scores: Vec<BTreeMap<OptionLabel, f64>>,
    /// The correct option's score, one per score kind.
    pub correct_scores: Vec<f64>,
}

/// Score the whole pool once for every kind in `kinds`.
pub fn score_pool_once(
    pool: &Pool,
    scorer: &dyn Scorer,
    kinds: &[NonconformityConfig],
) -> Result<Vec<ScoredInstance>, ScoreError> {
    pool.instances
        .par_iter()
        .map(|bi| {
            let correct = bi
                .correct_label
                .ok_or_else(|| ScoreError::Backend("pool has no ground-truth labels".into()))?;
            let scored = scorer.score(&bi.instance)?;
            let mut option_scores = Vec::with_capacity(kinds.len());
            let mut correct_scores = Vec::with_capacity(kinds.len());
            for kind in kinds {
                let per_option: BTreeMap<OptionLabel, f64> = bi
                    .instance
                    .options
                    .iter()
                    .map(|(label, _)| {
                        nonconformity(&scored.probabilities, *label, kind).map(|s| (*label, s))
                    })
                    .collect::<Result<_, _>>()?;
                correct_scores.push(per_option[&correct]);
                option_scores.push(per_option);
            }
            Ok(ScoredInstance {
                correct,
                probabilities: scored.probabilities,
                option_scores,
                correct_scores,
            })
        })
        .collect()
}

/// Rebuild the prediction set for a cached instance under a threshold.
pub fn set_from_cached(
    bi: &BenchInstance,
    cached: &ScoredInstance,
    kind_index: usize,
    threshold: &CalibratedThreshold,
) -> PredictionSet {
    let scores = cached.option_scores[kind_index].clone();
    let members = bi
        .instance
        .options
        .iter()
        .filter(|(label, _)| scores[label] <= threshold.q_hat)
        .cloned()
        .collect();
    PredictionSet {
        members,
        scores,
        probabilities: cached.probabilities.clone(),
        threshold: threshold.clone(),
    }
}

/// A shuffled calibration/test partition of the pool indices.
pub fn split_indices(pool_size: usize, n_cal: usize, split_seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut indices: Vec<usize> = (0..pool_size).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    indices.shuffle(&mut rng);
    let cal = indices[..n_cal].to_vec();
    let test = indices[n_cal..].to_vec();
    (cal, test)
}

/// Empirical coverage of one calibration/test split.
pub fn split_coverage(
    cached: &[ScoredInstance],
    kind_index: usize,
    kind: NonconformityConfig,
    alpha: f64,
    cal: &[usize],
    test: &[usize],
) -> f64 {
    let cal_scores: Vec<f64> = cal
        .iter()
        .map(|&i| cached[i].correct_scores[kind_index])
        .collect();
    let threshold =
        calibrate_scores(&cal_scores, alpha, kind).expect("non-empty calibration split");
    let covered = test
        .iter()
        .filter(|&&i| cached[i].correct_scores[kind_index] <= threshold.q_hat)
        .count();
    covered as f64 / test.len() as f64
}

/// Calibrate a threshold from one split's calibration indices.
pub fn split_threshold(
    cached: &[ScoredInstance],
    kind_index: usize,
    kind: NonconformityConfig,
    alpha: f64,
    cal: &[usize],
) -> CalibratedThreshold {
    let cal_scores: Vec<f64> = cal
        .iter()
        .map(|&i| cached[i].correct_scores[kind_index])
        .collect();
    calibrate_scores(&cal_scores, alpha, kind).expect("non-empty calibration split")
}

/// Decision outcomes over one split: the end-to-end safe-outcome rate
/// (delegation counted safe, adopted paths judged against the
/// evaluation scene) and the delegation rate.
pub struct SplitDecisions {
    pub safe_rate: f64,
    pub hud_rate: f64,
    pub coverage: f64,
}

pub fn split_decisions(
    pool: &Pool,
    cached: &[ScoredInstance],
    kind_index: usize,
    threshold: &CalibratedThreshold,
    test: &[usize],
    dc: &DecisionConfig,
) -> SplitDecisions {
    let mut safe = 0usize;
    let mut delegated = 0usize;
    let mut covered = 0usize;
    for &i in test {
        let bi = &pool.instances[i];
        let set = set_from_cached(bi, &cached[i], kind_index, threshold);
        covered += set.contains(cached[i].correct) as usize;
        let decision = decide(&set, &bi.instance.scene, dc);
        if is_safe_outcome(pool, bi, &decision) {
            safe += 1;
        }
        delegated += decision.outcome.is_delegate() as usize;
    }
    SplitDecisions {
        safe_rate: safe as f64 / test.len() as f64,
        hud_rate: delegated as f64 / test.len() as f64,
        coverage: covered as f64 / test.len() as f64,
    }
}

/// Delegation is assumed to resolve safely (a human takes over);
/// adopted paths are judged by the oracle against actual agent motion.
pub fn is_safe_outcome(pool: &Pool, bi: &BenchInstance, decision: &Decision) -> bool {
    match decision.outcome.adopted() {
        Some(trajectory) => pool.oracle.is_safe(trajectory, &bi.eval_scene),
        None => true,
    }
}

/// Delegation rate of the singleton-only baseline over a whole scored
/// pool at one threshold.
pub fn singleton_hud(
    pool: &Pool,
    cached: &[ScoredInstance],
    kind_index: usize,
    threshold: &CalibratedThreshold,
) -> f64 {
    let delegated = pool
        .instances
        .iter()
        .zip(cached)
        .filter(|(bi, si)| {
            let set = set_from_cached(bi, si, kind_index, threshold);
            singleton_decide(&set, &bi.instance.scene)
                .outcome
                .is_delegate()
        })
        .count();
    delegated as f64 / pool.instances.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{build_pool, PoolConfig};
    use crate::config::{ExperimentConfig, ScorerMode};
    use calpath_core::{predict_set, MockScorerConfig};

    #[test]
    fn cached_sets_match_predict_set() {
        let cfg = ExperimentConfig::default();
        let pool = build_pool(&PoolConfig::from_experiment(&cfg, 30, 11)).unwrap();
        let scorer = pool.scorer(ScorerMode::Safety, MockScorerConfig::default(), 5);
        let kinds = [NonconformityConfig::lac(), NonconformityConfig::aps()];
        let cached = score_pool_once(&pool, &scorer, &kinds).unwrap();
        for (kind_index, kind) in kinds.iter().enumerate() {
            let cal_scores: Vec<f64> = cached
                .iter()
                .take(10)
                .map(|c| c.correct_scores[kind_index])
                .collect();
            let threshold = calibrate_scores(&cal_scores, 0.2, *kind).unwrap();
            for (bi, si) in pool.instances.iter().zip(&cached) {
                let direct = predict_set(&bi.instance, &scorer, &threshold).unwrap();
                let rebuilt = set_from_cached(bi, si, kind_index, &threshold);
                assert_eq!(direct.member_labels(), rebuilt.member_labels());
            }
        }
    }

    #[test]
    fn splits_are_disjoint_and_seeded() {
        let (cal_a, test_a) = split_indices(100, 30, 7);
        let (cal_b, test_b) = split_indices(100, 30, 7);
        assert_eq!(cal_a, cal_b);
        assert_eq!(test_a, test_b);
        assert_eq!(cal_a.len(), 30);
        assert_eq!(test_a.len(), 70);
        let mut all: Vec<usize> = cal_a.iter().chain(&test_a).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let (cal_c, _) = split_indices(100, 30, 8);
        assert_ne!(cal_a, cal_c);
    }
}
