//! Seeded synthetic benches: pools of planning instances with known
//! safe references, used by calibration, evaluation, sweeps, and
//! ablations.
//!
//! Each pool instance carries two views of the same traffic: the
//! *evaluation* scene holds the agents' actual motion (what safety is
//! judged against), and the *planning* scene holds predicted tracks,
//! optionally perturbed by a seeded velocity error. With zero
//! prediction noise the views coincide. The reference trajectory is
//! kept clear of all actual tracks, so an injected ground-truth option
//! is safe by construction.

use crate::config::{ExperimentConfig, ScorerMode, ScorerSection};
use calpath_core::{
    build_mcqa, generate_candidates, stable_hash64, AgentKind, AgentTrack, CalibrationRecord,
    GenerateError, GeneratorConfig, Goal, McqaInstance, MockScorerConfig, NonconformityConfig,
    OptionLabel, OptionScores, Point2, SafetyOracle, Scene, ScoreError, Scorer, Trajectory,
    HORIZON,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct PoolConfig {
    pub size: usize,
    pub seed: u64,
    pub k: usize,
    pub agents_min: usize,
    pub agents_max: usize,
    pub speed_min: f64,
    pub speed_max: f64,
    pub prediction_noise: f64,
    pub reference_margin: f64,
    pub maneuver_jitter: f64,
    /// Keep actual agent tracks clear of the reference corridor.
    pub protect_reference: bool,
    /// Append the reference as a ground-truth option (coverage benches).
    pub inject_ground_truth: bool,
}

impl PoolConfig {
    pub fn from_experiment(cfg: &ExperimentConfig, size: usize, seed: u64) -> Self {
        PoolConfig {
            size,
            seed,
            k: cfg.k,
            agents_min: cfg.pool.agents_min,
            agents_max: cfg.pool.agents_max,
            speed_min: cfg.pool.speed_min,
            speed_max: cfg.pool.speed_max,
            prediction_noise: cfg.pool.prediction_noise,
            reference_margin: cfg.pool.reference_margin,
            maneuver_jitter: cfg.pool.maneuver_jitter,
            protect_reference: true,
            inject_ground_truth: true,
        }
    }
}

/// One bench instance: the MCQA view the pipeline sees, the evaluation
/// scene safety is judged against, and the known-safe reference.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchInstance {
    pub id: u64,
    pub instance: McqaInstance,
    pub eval_scene: Scene,
    pub reference: Trajectory,
    pub correct_label: Option<OptionLabel>,
}

#[derive(Debug, Clone)]
pub struct Pool {
    pub instances: Vec<BenchInstance>,
    pub oracle: SafetyOracle,
}

fn pick_goal(rng: &mut ChaCha8Rng) -> Goal {
    let g: f64 = rng.random_range(0.0..1.0);
    if g < 0.7 {
        Goal::GoStraight
    } else if g < 0.8 {
        Goal::Stop
    } else if g < 0.9 {
        Goal::Left
    } else {
        Goal::Right
    }
}

fn pick_kind(rng: &mut ChaCha8Rng) -> AgentKind {
    let g: f64 = rng.random_range(0.0..1.0);
    if g < 0.5 {
        AgentKind::Vehicle
    } else if g < 0.7 {
        AgentKind::Cyclist
    } else if g < 0.9 {
        AgentKind::Pedestrian
    } else {
        AgentKind::Object
    }
}

fn build_instance(cfg: &PoolConfig, index: u64) -> Result<BenchInstance, GenerateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index + 1);
    let speed = rng.random_range(cfg.speed_min..cfg.speed_max);
    let goal = pick_goal(&mut rng);
    let base = Scene::open_road(speed, goal);
    let dt = base.frame_dt;

    // Reference = the goal-aligned template with no jitter.
    let reference = generate_candidates(
        &base,
        &GeneratorConfig {
            k: 2,
            seed: 0,
            maneuver_jitter: 0.0,
            backend: calpath_core::GeneratorBackend::Synthetic,
        },
    )?
    .candidates[0]
        .trajectory
        .clone();

    let n_agents = rng.random_range(cfg.agents_min..=cfg.agents_max);
    let mut actual: Vec<(AgentKind, Point2, Point2)> = Vec::new();
    for _ in 0..n_agents {
        for _attempt in 0..30 {
            let kind = pick_kind(&mut rng);
            let current = Point2::new(rng.random_range(-10.0..10.0), rng.random_range(-2.0..26.0));
            let velocity = Point2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..3.0));
            if current.norm() < 3.0 {
                continue;
            }
            let conflicts = cfg.protect_reference
                && (0..HORIZON).any(|f| {
                    let pos = current + velocity * ((f + 1) as f64 * dt);
                    reference.point(f).distance(pos)
                        <= 1.0 + kind.default_radius() + cfg.reference_margin
                });
            if conflicts {
                continue;
            }
            actual.push((kind, current, velocity));
            break;
        }
    }

    let noise = if cfg.prediction_noise > 0.0 {
        Some(Normal::new(0.0, cfg.prediction_noise).expect("valid noise scale"))
    } else {
        None
    };
    let mut eval_agents = Vec::with_capacity(actual.len());
    let mut plan_agents = Vec::with_capacity(actual.len());
    for (i, (kind, current, velocity)) in actual.iter().enumerate() {
        let track = |v: Point2| -> Vec<Point2> {
            (1..=HORIZON)
                .map(|f| *current + v * (f as f64 * dt))
                .collect()
        };
        let predicted_velocity = match &noise {
            Some(n) => *velocity + Point2::new(n.sample(&mut rng), n.sample(&mut rng)),
            None => *velocity,
        };
        eval_agents.push(
            AgentTrack::new(format!("agent-{i}"), *kind, *current).with_predicted(track(*velocity)),
        );
        plan_agents.push(
            AgentTrack::new(format!("agent-{i}"), *kind, *current)
                .with_predicted(track(predicted_velocity)),
        );
    }

    let mut eval_scene = base.clone();
    eval_scene.agents = eval_agents;
    let mut plan_scene = base;
    plan_scene.agents = plan_agents;

    let generator = GeneratorConfig {
        k: cfg.k,
        seed: rng.random::<u64>(),
        maneuver_jitter: cfg.maneuver_jitter,
        backend: calpath_core::GeneratorBackend::Synthetic,
    };
    let mut set = generate_candidates(&plan_scene, &generator)?;
    let correct_label = if cfg.inject_ground_truth {
        set.inject_ground_truth(reference.clone());
        set.ground_truth_label()
    } else {
        None
    };
    let instance = build_mcqa(&set);
    Ok(BenchInstance {
        id: index,
        instance,
        eval_scene,
        reference,
        correct_label,
    })
}

/// Build the pool; instances come from independent seed streams and
/// are exchangeable draws from one synthetic distribution.
pub fn build_pool(cfg: &PoolConfig) -> Result<Pool, GenerateError> {
    let instances: Vec<BenchInstance> = (0..cfg.size as u64)
        .into_par_iter()
        .map(|i| build_instance(cfg, i))
        .collect::<Result<_, _>>()?;
    Ok(Pool {
        instances,
        oracle: SafetyOracle::default(),
    })
}

/// Oracle-informed scorer over a pool: per instance, options judged
/// safe against the *evaluation* scene get the safe base logit
/// (`Safety` mode), or only the known-correct option does (`Reference`
/// mode), plus seeded Gaussian noise. Keyed by a stable prompt hash so
/// instances score independently and in any order.
#[derive(Debug, Clone)]
pub struct BenchScorer {
    assignments: BTreeMap<u64, BTreeMap<OptionLabel, bool>>,
    cfg: MockScorerConfig,
    seed: u64,
}

impl Scorer for BenchScorer {
    fn score(&self, instance: &McqaInstance) -> Result<OptionScores, ScoreError> {
        let key = stable_hash64(instance.prompt.as_bytes());
        let flags = self
            .assignments
            .get(&key)
            .ok_or_else(|| ScoreError::Backend("instance not in this bench pool".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ key);
        let noise = if self.cfg.noise_scale > 0.0 {
            Some(Normal::new(0.0, self.cfg.noise_scale).expect("valid noise scale"))
        } else {
            None
        };
        let mut logits = BTreeMap::new();
        for (label, _) in &instance.options {
            let favored = flags.get(label).copied().unwrap_or(false);
            let base = if favored {
                self.cfg.base_safe
            } else {
                self.cfg.base_unsafe
            };
            let eps = noise.as_ref().map_or(0.0, |n| n.sample(&mut rng));
            logits.insert(*label, base + eps);
        }
        OptionScores::from_logits(logits)
    }
}

impl Pool {
    pub fn scorer(&self, mode: ScorerMode, cfg: MockScorerConfig, seed: u64) -> BenchScorer {
        let assignments = self
            .instances
            .iter()
            .map(|bi| {
                let key = stable_hash64(bi.instance.prompt.as_bytes());
                let flags: BTreeMap<OptionLabel, bool> = bi
                    .instance
                    .options
                    .iter()
                    .map(|(label, candidate)| {
                        let favored = match mode {
                            ScorerMode::Safety => {
                                self.oracle.is_safe(&candidate.trajectory, &bi.eval_scene)
                            }
                            ScorerMode::Reference => Some(*label) == bi.correct_label,
                        };
                        (*label, favored)
                    })
                    .collect();
                (key, flags)
            })
            .collect();
        BenchScorer {
            assignments,
            cfg,
            seed,
        }
    }

    pub fn scorer_from(&self, section: &ScorerSection) -> BenchScorer {
        self.scorer(
            section.mode,
            MockScorerConfig {
                base_safe: section.base_safe,
                base_unsafe: section.base_unsafe,
                noise_scale: section.noise_scale,
            },
            section.seed,
        )
    }

    /// Correct-option non-conformity scores for calibration. Requires
    /// the pool to carry ground-truth labels.
    pub fn calibration_records(
        &self,
        scorer: &dyn Scorer,
        kind: &NonconformityConfig,
    ) -> Result<Vec<CalibrationRecord>, ScoreError> {
        self.instances
            .iter()
            .map(|bi| {
                let correct = bi
                    .correct_label
                    .ok_or_else(|| ScoreError::Backend("pool has no ground-truth labels".into()))?;
                let scored = scorer.score(&bi.instance)?;
                let s = calpath_core::nonconformity(&scored.probabilities, correct, kind)?;
                Ok(CalibrationRecord::new(bi.instance.clone(), correct, s))
            })
            .collect()
    }
}
