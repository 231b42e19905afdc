//! Stage 2, front half: frame a candidate set as a multiple-choice
//! question, obtain per-option logits from a pluggable scorer, and turn
//! them into non-conformity scores.
//!
//! Scores (lower = more conforming), for an option with softmax
//! probability `p` among the listed options only:
//!
//! - `LAC`:  `1 - p`
//! - `APS`:  cumulative probability mass down to and including the
//!   option, ranked by descending probability (ties broken by label
//!   order; no randomization)
//! - `RAPS`: APS plus `lambda * max(0, rank - k_reg)` with 1-based rank

use crate::generation::{CandidateSet, OptionLabel};
use crate::scene::{scene_to_text, SafetyOracle, Scene};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("no logits supplied")]
    EmptyLogits,
    #[error("non-finite logit for option {label}")]
    NonFiniteLogit { label: OptionLabel },
    #[error("unknown option label {label}")]
    UnknownLabel { label: OptionLabel },
    #[error("instance has no options")]
    NoOptions,
    #[error("scorer backend error: {0}")]
    Backend(String),
}

/// A candidate set framed as a single multiple-choice question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqaInstance {
    pub scene: Scene,
    pub options: Vec<(OptionLabel, crate::generation::CandidatePath)>,
    pub prompt: String,
}

impl McqaInstance {
    pub fn labels(&self) -> Vec<OptionLabel> {
        self.options.iter().map(|(l, _)| *l).collect()
    }

    pub fn option(&self, label: OptionLabel) -> Option<&crate::generation::CandidatePath> {
        self.options
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, c)| c)
    }
}

/// Per-option logits and their softmax over exactly the option labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionScores {
    pub logits: BTreeMap<OptionLabel, f64>,
    pub probabilities: BTreeMap<OptionLabel, f64>,
}

impl OptionScores {
    pub fn from_logits(logits: BTreeMap<OptionLabel, f64>) -> Result<Self, ScoreError> {
        let probabilities = softmax_probs(&logits)?;
        Ok(OptionScores {
            logits,
            probabilities,
        })
    }

    /// Label with the highest probability (ties break by label order).
    pub fn top_label(&self) -> Option<OptionLabel> {
        self.probabilities
            .iter()
            .max_by(|a, b| {
                a.1.partial_cmp(b.1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.0.cmp(a.0))
            })
            .map(|(l, _)| *l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NonconformityKind {
    Lac,
    Aps,
    Raps,
}

impl std::fmt::Display for NonconformityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NonconformityKind::Lac => "LAC",
            NonconformityKind::Aps => "APS",
            NonconformityKind::Raps => "RAPS",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonconformityConfig {
    pub kind: NonconformityKind,
    /// RAPS rank penalty weight; ignored unless kind = RAPS.
    pub raps_lambda: f64,
    /// RAPS penalty-free rank budget; ignored unless kind = RAPS.
    pub raps_k_reg: usize,
}

impl NonconformityConfig {
    pub fn lac() -> Self {
        NonconformityConfig {
            kind: NonconformityKind::Lac,
            raps_lambda: 0.1,
            raps_k_reg: 1,
        }
    }

    pub fn aps() -> Self {
        NonconformityConfig {
            kind: NonconformityKind::Aps,
            ..Self::lac()
        }
    }

    pub fn raps(lambda: f64, k_reg: usize) -> Self {
        NonconformityConfig {
            kind: NonconformityKind::Raps,
            raps_lambda: lambda,
            raps_k_reg: k_reg,
        }
    }

    pub fn of_kind(kind: NonconformityKind) -> Self {
        NonconformityConfig {
            kind,
            ..Self::lac()
        }
    }
}

impl Default for NonconformityConfig {
    fn default() -> Self {
        Self::lac()
    }
}

/// The seam a scoring backend plugs into: one call per MCQA instance,
/// returning logits and probabilities covering every option label
/// exactly once.
pub trait Scorer: Send + Sync {
    fn score(&self, instance: &McqaInstance) -> Result<OptionScores, ScoreError>;
}

fn option_letter_list(labels: &[OptionLabel]) -> String {
    match labels.len() {
        0 => String::new(),
        1 => labels[0].to_string(),
        2 => format!("{} or {}", labels[0], labels[1]),
        n => {
            let head = labels[..n - 1]
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(", ");
            format!("{head}, or {}", labels[n - 1])
        }
    }
}

/// Frame a labeled candidate set as a multiple-choice question. Option
/// order equals candidate order; the instruction line restricts the
/// answer to a single letter.
pub fn build_mcqa(set: &CandidateSet) -> McqaInstance {
    let options: Vec<(OptionLabel, crate::generation::CandidatePath)> = set
        .candidates
        .iter()
        .map(|c| (c.label.expect("candidates are labeled"), c.clone()))
        .collect();
    let mut prompt = String::new();
    let _ = writeln!(prompt, "** Path Selection **");
    let _ = writeln!(
        prompt,
        "You are the decision maker to choose a path that the autonomous vehicle will follow given the Mission Goal. Consider reasoning to make a choice. Based on the following options."
    );
    let _ = writeln!(prompt);
    let _ = writeln!(
        prompt,
        "select the best plan based on the following situation:"
    );
    prompt.push_str(&scene_to_text(&set.scene));
    let _ = writeln!(prompt);
    for (label, candidate) in &options {
        let waypoints = candidate
            .trajectory
            .points()
            .iter()
            .map(|p| format!("({:.2}, {:.2})", p.x, p.y))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(
            prompt,
            "{label}: Meta Action: {}. Trajectory: [{waypoints}]. Reasoning: {}",
            candidate.meta_action, candidate.rationale
        );
    }
    let _ = writeln!(prompt);
    let labels: Vec<OptionLabel> = options.iter().map(|(l, _)| *l).collect();
    let _ = writeln!(
        prompt,
        "select the best option ({}), and respond **only** with the chosen letter, without any additional text.",
        option_letter_list(&labels)
    );
    McqaInstance {
        scene: set.scene.clone(),
        options,
        prompt,
    }
}

/// Numerically stable softmax over the given labels only.
pub fn softmax_probs(
    logits: &BTreeMap<OptionLabel, f64>,
) -> Result<BTreeMap<OptionLabel, f64>, ScoreError> {
    if logits.is_empty() {
        return Err(ScoreError::EmptyLogits);
    }
    for (label, value) in logits {
        if !value.is_finite() {
            return Err(ScoreError::NonFiniteLogit { label: *label });
        }
    }
    let max = logits.values().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: BTreeMap<OptionLabel, f64> =
        logits.iter().map(|(l, v)| (*l, (v - max).exp())).collect();
    let total: f64 = exps.values().sum();
    Ok(exps.into_iter().map(|(l, e)| (l, e / total)).collect())
}

/// Option labels sorted by descending probability, ties broken by label
/// order. Rank of a label is its 1-based position in this order.
fn descending_order(probabilities: &BTreeMap<OptionLabel, f64>) -> Vec<(OptionLabel, f64)> {
    let mut entries: Vec<(OptionLabel, f64)> =
        probabilities.iter().map(|(l, p)| (*l, *p)).collect();
    entries.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    entries
}

/// Non-conformity score of `label` under the configured kind.
pub fn nonconformity(
    probabilities: &BTreeMap<OptionLabel, f64>,
    label: OptionLabel,
    cfg: &NonconformityConfig,
) -> Result<f64, ScoreError> {
    let p = *probabilities
        .get(&label)
        .ok_or(ScoreError::UnknownLabel { label })?;
    match cfg.kind {
        NonconformityKind::Lac => Ok(1.0 - p),
        NonconformityKind::Aps => Ok(cumulative_mass(probabilities, label)),
        NonconformityKind::Raps => {
            let aps = cumulative_mass(probabilities, label);
            let rank = descending_order(probabilities)
                .iter()
                .position(|(l, _)| *l == label)
                .expect("label present")
                + 1;
            let penalty = cfg.raps_lambda * (rank.saturating_sub(cfg.raps_k_reg)) as f64;
            Ok(aps + penalty)
        }
    }
}

fn cumulative_mass(probabilities: &BTreeMap<OptionLabel, f64>, label: OptionLabel) -> f64 {
    let mut cum = 0.0;
    for (l, p) in descending_order(probabilities) {
        cum += p;
        if l == label {
            break;
        }
    }
    cum
}

/// Deterministic stand-in for a language-model scorer: options the
/// oracle judges safe get `base_safe`, the rest `base_unsafe`, plus
/// seeded Gaussian noise. Noise scale tunes the scorer's accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MockScorerConfig {
    pub base_safe: f64,
    pub base_unsafe: f64,
    pub noise_scale: f64,
}

impl Default for MockScorerConfig {
    fn default() -> Self {
        MockScorerConfig {
            base_safe: 2.0,
            base_unsafe: 0.0,
            noise_scale: 1.0,
        }
    }
}

/// Score an instance with the oracle-backed mock backend. Deterministic
/// for a fixed seed; noise draws follow option order.
pub fn mock_score(
    instance: &McqaInstance,
    oracle: &SafetyOracle,
    cfg: &MockScorerConfig,
    seed: u64,
) -> Result<OptionScores, ScoreError> {
    if instance.options.is_empty() {
        return Err(ScoreError::NoOptions);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if cfg.noise_scale > 0.0 {
        Some(Normal::new(0.0, cfg.noise_scale).map_err(|e| ScoreError::Backend(e.to_string()))?)
    } else {
        None
    };
    let mut logits = BTreeMap::new();
    for (label, candidate) in &instance.options {
        let base = if oracle.is_safe(&candidate.trajectory, &instance.scene) {
            cfg.base_safe
        } else {
            cfg.base_unsafe
        };
        let eps = noise.as_ref().map_or(0.0, |n| n.sample(&mut rng));
        logits.insert(*label, base + eps);
    }
    OptionScores::from_logits(logits)
}

/// FNV-1a over the bytes; stable across platforms and releases, used
/// to derive per-instance seeds from prompt text.
pub fn stable_hash64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// [`Scorer`] wrapper around [`mock_score`]. The per-call seed mixes
/// the configured base seed with a stable hash of the instance prompt,
/// so instances score independently yet reproducibly, in any order.
#[derive(Debug, Clone)]
pub struct MockScorer {
    pub oracle: SafetyOracle,
    pub cfg: MockScorerConfig,
    pub seed: u64,
}

impl MockScorer {
    pub fn new(oracle: SafetyOracle, cfg: MockScorerConfig, seed: u64) -> Self {
        MockScorer { oracle, cfg, seed }
    }
}

impl Scorer for MockScorer {
    fn score(&self, instance: &McqaInstance) -> Result<OptionScores, ScoreError> {
        let seed = self.seed ^ stable_hash64(instance.prompt.as_bytes());
        mock_score(instance, &self.oracle, &self.cfg, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::{generate_candidates, GeneratorConfig};
    use crate::geom::Point2;
    use crate::scene::{AgentKind, AgentTrack, Goal, Trajectory};
    use rand::Rng;

    fn labels(n: usize) -> Vec<OptionLabel> {
        (0..n)
            .map(|i| OptionLabel::from_index(i).unwrap())
            .collect()
    }

    fn logit_map(values: &[f64]) -> BTreeMap<OptionLabel, f64> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (OptionLabel::from_index(i).unwrap(), *v))
            .collect()
    }

    #[test]
    fn softmax_matches_direct_normalization() {
        let probs = softmax_probs(&logit_map(&[2.0, 1.0, 0.0])).unwrap();
        let l = labels(3);
        assert!((probs[&l[0]] - 0.6652).abs() < 1e-4);
        assert!((probs[&l[1]] - 0.2447).abs() < 1e-4);
        assert!((probs[&l[2]] - 0.0900).abs() < 1e-4);
        // Direct exponential-normalization oracle.
        let e: Vec<f64> = [2.0f64, 1.0, 0.0].iter().map(|v| v.exp()).collect();
        let z: f64 = e.iter().sum();
        for (i, label) in l.iter().enumerate() {
            assert!((probs[label] - e[i] / z).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_uniform_logits() {
        let probs = softmax_probs(&logit_map(&[0.3, 0.3, 0.3, 0.3])).unwrap();
        for p in probs.values() {
            assert!((p - 0.25).abs() < 1e-12);
        }
        let sum: f64 = probs.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax_probs(&logit_map(&[1.0, 2.0, 3.0])).unwrap();
        let b = softmax_probs(&logit_map(&[1001.0, 1002.0, 1003.0])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn softmax_rejects_empty_and_non_finite() {
        assert_eq!(
            softmax_probs(&BTreeMap::new()),
            Err(ScoreError::EmptyLogits)
        );
        let err = softmax_probs(&logit_map(&[1.0, f64::NAN])).unwrap_err();
        assert_eq!(
            err,
            ScoreError::NonFiniteLogit {
                label: OptionLabel::from_index(1).unwrap()
            }
        );
    }

    #[test]
    fn lac_examples() {
        let probs = softmax_probs(&logit_map(&[2.0, 1.0, 0.0])).unwrap();
        let a = OptionLabel::from_index(0).unwrap();
        let s = nonconformity(&probs, a, &NonconformityConfig::lac()).unwrap();
        assert!((s - 0.3348).abs() < 1e-4);

        let uniform = softmax_probs(&logit_map(&[0.0; 4])).unwrap();
        let s = nonconformity(&uniform, a, &NonconformityConfig::lac()).unwrap();
        assert!((s - 0.75).abs() < 1e-12);
    }

    #[test]
    fn aps_and_raps_hand_cases() {
        // probs {A: 0.5, B: 0.3, C: 0.2}
        let probs: BTreeMap<OptionLabel, f64> = [(0, 0.5), (1, 0.3), (2, 0.2)]
            .iter()
            .map(|&(i, p)| (OptionLabel::from_index(i).unwrap(), p))
            .collect();
        let b = OptionLabel::from_index(1).unwrap();
        let aps = nonconformity(&probs, b, &NonconformityConfig::aps()).unwrap();
        assert!((aps - 0.8).abs() < 1e-12);
        let raps = nonconformity(&probs, b, &NonconformityConfig::raps(0.1, 1)).unwrap();
        assert!((raps - 0.9).abs() < 1e-12);
        // Lowest-ranked label accumulates everything.
        let c = OptionLabel::from_index(2).unwrap();
        let aps_c = nonconformity(&probs, c, &NonconformityConfig::aps()).unwrap();
        assert!((aps_c - 1.0).abs() < 1e-12);
        // Top label's APS equals its own probability.
        let a = OptionLabel::from_index(0).unwrap();
        let aps_a = nonconformity(&probs, a, &NonconformityConfig::aps()).unwrap();
        assert!((aps_a - 0.5).abs() < 1e-12);
    }

    #[test]
    fn raps_with_zero_lambda_is_aps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(2..=8usize);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let probs = softmax_probs(&logit_map(&raw)).unwrap();
            for label in labels(n) {
                let aps = nonconformity(&probs, label, &NonconformityConfig::aps()).unwrap();
                let raps =
                    nonconformity(&probs, label, &NonconformityConfig::raps(0.0, 1)).unwrap();
                assert_eq!(aps, raps);
            }
        }
    }

    #[test]
    fn aps_ties_break_by_label_order() {
        let probs: BTreeMap<OptionLabel, f64> = [(0, 0.4), (1, 0.4), (2, 0.2)]
            .iter()
            .map(|&(i, p)| (OptionLabel::from_index(i).unwrap(), p))
            .collect();
        let a = OptionLabel::from_index(0).unwrap();
        let b = OptionLabel::from_index(1).unwrap();
        let aps_a = nonconformity(&probs, a, &NonconformityConfig::aps()).unwrap();
        let aps_b = nonconformity(&probs, b, &NonconformityConfig::aps()).unwrap();
        assert!((aps_a - 0.4).abs() < 1e-12);
        assert!((aps_b - 0.8).abs() < 1e-12);
    }

    #[test]
    fn unknown_label_is_rejected() {
        let probs = softmax_probs(&logit_map(&[1.0, 2.0])).unwrap();
        let z = OptionLabel::from_char('Z').unwrap();
        assert_eq!(
            nonconformity(&probs, z, &NonconformityConfig::lac()),
            Err(ScoreError::UnknownLabel { label: z })
        );
    }

    #[test]
    fn lac_threshold_duality() {
        // {label : LAC <= 1 - tau} equals {label : p >= tau}.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.random_range(2..=6usize);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let probs = softmax_probs(&logit_map(&raw)).unwrap();
            let tau: f64 = rng.random_range(0.05..0.95);
            for label in labels(n) {
                let p = probs[&label];
                if (p - tau).abs() < 1e-9 {
                    continue;
                }
                let lac = nonconformity(&probs, label, &NonconformityConfig::lac()).unwrap();
                assert_eq!(lac <= 1.0 - tau, p >= tau);
            }
        }
    }

    #[test]
    fn mcqa_prompt_lists_options_and_instruction() {
        let scene = crate::scene::Scene::open_road(5.0, Goal::GoStraight);
        let set = generate_candidates(&scene, &GeneratorConfig::default()).unwrap();
        let instance = build_mcqa(&set);
        assert_eq!(instance.options.len(), 4);
        for letter in ["A:", "B:", "C:", "D:"] {
            assert!(instance.prompt.contains(&format!("\n{letter} Meta Action")));
        }
        assert!(!instance.prompt.contains("\nE: "));
        assert!(instance.prompt.contains(
            "select the best option (A, B, C, or D), and respond **only** with the chosen letter, without any additional text."
        ));
        // Purity.
        assert_eq!(instance.prompt, build_mcqa(&set).prompt);
    }

    #[test]
    fn mcqa_with_injected_reference_goes_to_e() {
        let scene = crate::scene::Scene::open_road(5.0, Goal::GoStraight);
        let mut set = generate_candidates(&scene, &GeneratorConfig::default()).unwrap();
        let reference = set.candidates[0].trajectory.clone();
        set.inject_ground_truth(reference);
        let instance = build_mcqa(&set);
        assert_eq!(instance.options.len(), 5);
        assert!(instance
            .prompt
            .contains("select the best option (A, B, C, D, or E)"));
    }

    fn blocked_instance() -> (McqaInstance, OptionLabel) {
        // One agent sits on the straight corridor; a shifted path avoids it.
        let mut scene = crate::scene::Scene::open_road(2.0, Goal::GoStraight);
        scene.agents = vec![AgentTrack::new(
            "blocker",
            AgentKind::Vehicle,
            Point2::new(0.0, 3.0),
        )];
        let straight = |dx: f64| {
            Trajectory::new((1..=6).map(|i| Point2::new(dx, i as f64)).collect()).unwrap()
        };
        let candidates = vec![
            crate::generation::CandidatePath::new(straight(0.0), "hold", "keep"),
            crate::generation::CandidatePath::new(straight(0.3), "hold", "keep"),
            crate::generation::CandidatePath::new(straight(4.0), "go around", "shift"),
            crate::generation::CandidatePath::new(straight(-0.3), "hold", "keep"),
        ];
        let set = CandidateSet::new(scene, candidates);
        let safe = OptionLabel::from_index(2).unwrap();
        (build_mcqa(&set), safe)
    }

    #[test]
    fn mock_noiseless_puts_mass_on_the_safe_option() {
        let (instance, safe) = blocked_instance();
        let cfg = MockScorerConfig {
            noise_scale: 0.0,
            ..Default::default()
        };
        let scores = mock_score(&instance, &SafetyOracle::default(), &cfg, 0).unwrap();
        assert_eq!(scores.top_label(), Some(safe));
        let sum: f64 = scores.probabilities.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mock_all_safe_is_uniform() {
        let scene = crate::scene::Scene::open_road(5.0, Goal::GoStraight);
        let set = generate_candidates(&scene, &GeneratorConfig::default()).unwrap();
        let instance = build_mcqa(&set);
        let cfg = MockScorerConfig {
            noise_scale: 0.0,
            ..Default::default()
        };
        let scores = mock_score(&instance, &SafetyOracle::default(), &cfg, 0).unwrap();
        for p in scores.probabilities.values() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn mock_is_deterministic_per_seed() {
        let (instance, _) = blocked_instance();
        let cfg = MockScorerConfig::default();
        let oracle = SafetyOracle::default();
        assert_eq!(
            mock_score(&instance, &oracle, &cfg, 42).unwrap(),
            mock_score(&instance, &oracle, &cfg, 42).unwrap()
        );
        assert_ne!(
            mock_score(&instance, &oracle, &cfg, 42).unwrap(),
            mock_score(&instance, &oracle, &cfg, 43).unwrap()
        );
    }

    #[test]
    fn mock_top1_accuracy_matches_gaussian_ordering_oracle() {
        // 10k scored instances vs an independent Monte-Carlo simulation
        // of argmax(base + noise) with the same separation and scale.
        let (instance, safe) = blocked_instance();
        let oracle = SafetyOracle::default();
        let cfg = MockScorerConfig {
            base_safe: 2.0,
            base_unsafe: 0.0,
            noise_scale: 1.0,
        };
        let trials = 10_000;
        let mut correct = 0;
        for seed in 0..trials {
            let scores = mock_score(&instance, &oracle, &cfg, seed).unwrap();
            if scores.top_label() == Some(safe) {
                correct += 1;
            }
        }
        let measured = correct as f64 / trials as f64;

        let mut rng = ChaCha8Rng::seed_from_u64(987_654);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut simulated_correct = 0;
        for _ in 0..trials {
            let safe_logit = 2.0 + normal.sample(&mut rng);
            let max_unsafe = (0..3)
                .map(|_| normal.sample(&mut rng))
                .fold(f64::NEG_INFINITY, f64::max);
            if safe_logit > max_unsafe {
                simulated_correct += 1;
            }
        }
        let simulated = simulated_correct as f64 / trials as f64;
        assert!(
            (measured - simulated).abs() <= 0.02,
            "measured {measured} vs simulated {simulated}"
        );
    }

    #[test]
    fn mock_scorer_trait_is_reproducible() {
        let (instance, _) = blocked_instance();
        let scorer = MockScorer::new(SafetyOracle::default(), MockScorerConfig::default(), 7);
        assert_eq!(
            scorer.score(&instance).unwrap(),
            scorer.score(&instance).unwrap()
        );
    }
}
