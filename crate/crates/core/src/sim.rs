//! Closed-loop desk-scale environments (highway, intersection,
//! roundabout) that replan every frame through the full pipeline and
//! measure success rate and time to collision.
//!
//! Worlds are deliberately small: disc-footprint agents follow fixed
//! straight or ring routes with a gap-keeping longitudinal rule, and
//! the ego executes one waypoint of the adopted plan per frame
//! (receding horizon). Everything is seeded; an episode replays
//! bit-identically from its config.

use crate::conformal::{predict_set, CalibratedThreshold};
use crate::decision::{decide, Decision, DecisionConfig, DecisionRecord, Evidence, Outcome};
use crate::generation::{generate_candidates, GenerateError, GeneratorConfig};
use crate::geom::Point2;
use crate::scene::{
    history_at_constant_speed, AgentKind, AgentTrack, EgoState, Goal, Scene, HORIZON,
};
use crate::scoring::{build_mcqa, ScoreError, Scorer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use thiserror::Error;

/// Ego speed ceiling, m/s.
pub const V_MAX: f64 = 15.0;
/// Ego acceleration / braking limit, m/s^2.
pub const A_MAX: f64 = 4.0;
/// Ego turn-rate limit, rad/s.
pub const TURN_MAX: f64 = 1.2;
const EGO_RADIUS: f64 = 1.0;
const FOLLOW_DIST: f64 = 8.0;
const CORRIDOR_HALF_WIDTH: f64 = 2.0;
const AGENT_ACCEL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Highway,
    Intersection,
    Roundabout,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Highway => "highway",
            EnvKind::Intersection => "intersection",
            EnvKind::Roundabout => "roundabout",
        }
    }

    fn spawn_speed(self) -> f64 {
        match self {
            EnvKind::Highway => 8.0,
            EnvKind::Intersection => 6.0,
            EnvKind::Roundabout => 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub n_agents: usize,
    pub frames: usize,
    pub dt: f64,
    pub seed: u64,
    pub replan_every: usize,
}

impl EnvConfig {
    pub fn standard(kind: EnvKind, seed: u64) -> Self {
        EnvConfig {
            kind,
            n_agents: 4,
            frames: 100,
            dt: 0.5,
            seed,
            replan_every: 1,
        }
    }
}

/// A fixed agent route: straight line or circular ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Route {
    Straight {
        origin: Point2,
        direction: Point2,
    },
    Ring {
        center: Point2,
        radius: f64,
        start_angle: f64,
    },
}

impl Route {
    pub fn position(&self, progress: f64) -> Point2 {
        match self {
            Route::Straight { origin, direction } => *origin + *direction * progress,
            Route::Ring {
                center,
                radius,
                start_angle,
            } => {
                let angle = start_angle + progress / radius;
                *center + Point2::new(angle.cos(), angle.sin()) * *radius
            }
        }
    }

    pub fn heading(&self, progress: f64) -> Point2 {
        match self {
            Route::Straight { direction, .. } => *direction,
            Route::Ring {
                radius,
                start_angle,
                ..
            } => {
                let angle = start_angle + progress / radius;
                Point2::new(-angle.sin(), angle.cos())
            }
        }
    }

    pub fn curvature(&self) -> f64 {
        match self {
            Route::Straight { .. } => 0.0,
            Route::Ring { radius, .. } => 1.0 / radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAgent {
    pub id: String,
    pub kind: AgentKind,
    pub route: Route,
    pub progress: f64,
    pub speed: f64,
    pub desired_speed: f64,
    pub radius: f64,
}

impl SimAgent {
    pub fn position(&self) -> Point2 {
        self.route.position(self.progress)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub kind: EnvKind,
    pub dt: f64,
    pub ego_position: Point2,
    /// World-frame heading, radians (pi/2 = facing +y).
    pub ego_heading: f64,
    pub ego_speed: f64,
    pub ego_radius: f64,
    pub agents: Vec<SimAgent>,
    pub frame: usize,
    pub collided: bool,
    /// Recent ego positions, oldest first; seeds the scene history.
    pub trail: Vec<Point2>,
}

/// Build a deterministic world for the config: kind-specific geometry,
/// seeded traffic with simple car-following, ego at the kind's spawn.
pub fn env_init(cfg: &EnvConfig) -> WorldState {
    assert!(cfg.frames >= 1, "episode needs at least one frame");
    assert!(cfg.dt > 0.0, "frame interval must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let speed = cfg.kind.spawn_speed();
    let mut agents = Vec::with_capacity(cfg.n_agents);
    match cfg.kind {
        EnvKind::Highway => {
            let lanes = [-3.7, 0.0, 3.7];
            let mut last_y = [8.0, 10.0, 8.0];
            for i in 0..cfg.n_agents {
                // The first agent is a slow leader in the ego lane.
                let lane_index = if i == 0 { 1 } else { i % lanes.len() };
                let gap = rng.random_range(12.0..25.0);
                let y = last_y[lane_index] + gap;
                last_y[lane_index] = y;
                let desired = if i == 0 {
                    rng.random_range(2.0..3.5)
                } else {
                    rng.random_range(2.0..6.0)
                };
                agents.push(SimAgent {
                    id: format!("agent-{i}"),
                    kind: AgentKind::Vehicle,
                    route: Route::Straight {
                        origin: Point2::new(lanes[lane_index], y),
                        direction: Point2::new(0.0, 1.0),
                    },
                    progress: 0.0,
                    speed: desired,
                    desired_speed: desired,
                    radius: AgentKind::Vehicle.default_radius(),
                });
            }
        }
        EnvKind::Intersection => {
            for i in 0..cfg.n_agents {
                let from_left = i % 2 == 0;
                let offset = 6.0 + 7.0 * (i / 2) as f64 + rng.random_range(0.0..4.0);
                // Each direction keeps to its own lane of the crossing road.
                let (origin, direction) = if from_left {
                    (Point2::new(-offset, -1.2), Point2::new(1.0, 0.0))
                } else {
                    (Point2::new(offset, 1.2), Point2::new(-1.0, 0.0))
                };
                let desired = rng.random_range(3.0..6.0);
                agents.push(SimAgent {
                    id: format!("agent-{i}"),
                    kind: AgentKind::Vehicle,
                    route: Route::Straight { origin, direction },
                    progress: 0.0,
                    speed: desired,
                    desired_speed: desired,
                    radius: AgentKind::Vehicle.default_radius(),
                });
            }
        }
        EnvKind::Roundabout => {
            let center = Point2::new(0.0, 18.0);
            let radius = 10.0;
            for i in 0..cfg.n_agents {
                let start_angle = if cfg.n_agents == 0 {
                    0.0
                } else {
                    i as f64 * TAU / cfg.n_agents as f64 + rng.random_range(0.0..0.4)
                };
                let desired = rng.random_range(2.5..5.0);
                agents.push(SimAgent {
                    id: format!("agent-{i}"),
                    kind: AgentKind::Vehicle,
                    route: Route::Ring {
                        center,
                        radius,
                        start_angle,
                    },
                    progress: 0.0,
                    speed: desired,
                    desired_speed: desired,
                    radius: AgentKind::Vehicle.default_radius(),
                });
            }
        }
    }
    let spawn = match cfg.kind {
        EnvKind::Highway => Point2::ORIGIN,
        EnvKind::Intersection => Point2::new(0.0, -20.0),
        EnvKind::Roundabout => Point2::ORIGIN,
    };
    let trail = (1..=4)
        .rev()
        .map(|i| spawn - Point2::new(0.0, speed * cfg.dt * i as f64))
        .collect();
    WorldState {
        kind: cfg.kind,
        dt: cfg.dt,
        ego_position: spawn,
        ego_heading: FRAC_PI_2,
        ego_speed: speed,
        ego_radius: EGO_RADIUS,
        agents,
        frame: 0,
        collided: false,
        trail,
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % TAU;
    if a > PI {
        a -= TAU;
    }
    if a < -PI {
        a += TAU;
    }
    a
}

/// Advance the world one frame: the ego moves toward the commanded
/// waypoint under speed/acceleration/turn-rate clamps, agents advance
/// under their gap-keeping rule, and the collision flag is set on disc
/// overlap with the ego.
pub fn env_step(world: &WorldState, ego_target: Point2) -> WorldState {
    let mut next = world.clone();
    let dt = world.dt;

    // Ego: clamp commanded motion to the kinematic envelope.
    let to_target = ego_target - world.ego_position;
    let dist = to_target.norm();
    let commanded_speed = (dist / dt).min(V_MAX);
    let new_speed = commanded_speed
        .clamp(world.ego_speed - A_MAX * dt, world.ego_speed + A_MAX * dt)
        .clamp(0.0, V_MAX);
    let desired_heading = if dist > 1e-9 {
        to_target.y.atan2(to_target.x)
    } else {
        world.ego_heading
    };
    let turn = wrap_angle(desired_heading - world.ego_heading).clamp(-TURN_MAX * dt, TURN_MAX * dt);
    let new_heading = world.ego_heading + turn;
    next.ego_heading = new_heading;
    next.ego_speed = new_speed;
    next.ego_position =
        world.ego_position + Point2::new(new_heading.cos(), new_heading.sin()) * (new_speed * dt);

    // Agents: two-phase update (decide from the old state, then move)
    // so the outcome does not depend on update order.
    let mut new_speeds = Vec::with_capacity(world.agents.len());
    for (i, agent) in world.agents.iter().enumerate() {
        let pos = agent.position();
        let heading = agent.route.heading(agent.progress);
        let mut blocked = false;
        let mut consider = |other: Point2| {
            let rel = other - pos;
            let ahead = rel.x * heading.x + rel.y * heading.y;
            let lateral = (rel.x * heading.y - rel.y * heading.x).abs();
            if ahead > 0.0 && ahead < FOLLOW_DIST && lateral < CORRIDOR_HALF_WIDTH {
                blocked = true;
            }
        };
        consider(world.ego_position);
        for (j, other) in world.agents.iter().enumerate() {
            if i != j {
                consider(other.position());
            }
        }
        let speed = if blocked {
            (agent.speed - A_MAX * dt).max(0.0)
        } else {
            (agent.speed + AGENT_ACCEL * dt).min(agent.desired_speed)
        };
        new_speeds.push(speed);
    }
    for (agent, speed) in next.agents.iter_mut().zip(new_speeds) {
        agent.speed = speed;
        agent.progress += speed * dt;
    }

    next.frame = world.frame + 1;
    next.trail.push(next.ego_position);
    if next.trail.len() > 8 {
        next.trail.remove(0);
    }
    for agent in &next.agents {
        if next.ego_position.distance(agent.position()) <= next.ego_radius + agent.radius {
            next.collided = true;
        }
    }
    next
}

/// Project the world into the planning frame: ego at the origin facing
/// +y, agents carrying constant-speed route predictions over the
/// horizon, history from the ego trail.
pub fn scene_from_world(world: &WorldState) -> Scene {
    let rotation = FRAC_PI_2 - world.ego_heading;
    let to_ego = |p: Point2| (p - world.ego_position).rotate(rotation);

    let agents = world
        .agents
        .iter()
        .map(|agent| {
            let predicted = (1..=HORIZON)
                .map(|f| {
                    let advance = agent.speed * world.dt * f as f64;
                    to_ego(agent.route.position(agent.progress + advance))
                })
                .collect();
            AgentTrack {
                agent_id: agent.id.clone(),
                kind: agent.kind,
                current: to_ego(agent.position()),
                predicted,
                radius: agent.radius,
            }
        })
        .collect();

    let mut history = [Point2::ORIGIN; 4];
    let n = world.trail.len();
    if n >= 4 {
        for (i, slot) in history.iter_mut().enumerate() {
            *slot = to_ego(world.trail[n - 4 + i]);
        }
    } else {
        history = history_at_constant_speed(world.ego_speed, world.dt);
    }

    let ego = EgoState::new(Point2::new(0.0, world.ego_speed), 0.0, Point2::ORIGIN);
    let mut scene = Scene::new(ego, agents, history, Goal::GoStraight);
    scene.frame_dt = world.dt;
    scene
}

/// Map a planned waypoint from the ego frame back to world coordinates.
pub fn from_ego_frame(world: &WorldState, point: Point2) -> Point2 {
    point.rotate(world.ego_heading - FRAC_PI_2) + world.ego_position
}

/// How the per-frame plan is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionPolicy {
    /// Generate, calibrated prediction set, similarity-gated decision.
    Full,
    /// Decision stage over the full candidate set, no calibrated filter.
    NoCpFilter,
    /// Always execute the generator's first candidate.
    GreedyFirst,
}

/// Everything a closed-loop episode needs besides the scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub generator: GeneratorConfig,
    pub threshold: CalibratedThreshold,
    pub decision: DecisionConfig,
    pub policy: ExecutionPolicy,
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Closed-loop trace of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub decisions: Vec<DecisionRecord>,
    pub first_collision_frame: Option<usize>,
    pub success: bool,
    pub hud_count: usize,
    /// Configured frame budget; the TTC when no collision occurs.
    pub frames: usize,
}

impl EpisodeLog {
    pub fn time_to_collision(&self) -> usize {
        self.first_collision_frame.unwrap_or(self.frames)
    }
}

fn plan_once(
    scene: &Scene,
    pipeline: &PipelineConfig,
    scorer: &dyn Scorer,
) -> Result<Decision, EpisodeError> {
    let set = generate_candidates(scene, &pipeline.generator)?;
    match pipeline.policy {
        ExecutionPolicy::GreedyFirst => {
            let first = &set.candidates[0];
            Ok(Decision {
                outcome: Outcome::Adopt(first.trajectory.clone()),
                evidence: Evidence {
                    set_size: set.candidates.len(),
                    min_similarity: None,
                    chosen_label: first.label,
                    chosen_collision_fraction: Some(crate::scene::collision_fraction(
                        &first.trajectory,
                        scene,
                    )),
                },
            })
        }
        ExecutionPolicy::Full => {
            let instance = build_mcqa(&set);
            let prediction = predict_set(&instance, scorer, &pipeline.threshold)?;
            Ok(decide(&prediction, scene, &pipeline.decision))
        }
        ExecutionPolicy::NoCpFilter => {
            let instance = build_mcqa(&set);
            let mut unfiltered = pipeline.threshold.clone();
            unfiltered.q_hat = f64::INFINITY;
            let prediction = predict_set(&instance, scorer, &unfiltered)?;
            Ok(decide(&prediction, scene, &pipeline.decision))
        }
    }
}

/// Braking fallback used while control is delegated: slow to a stop
/// along the current heading.
fn brake_target(world: &WorldState) -> Point2 {
    let speed = (world.ego_speed - A_MAX * world.dt).max(0.0);
    let heading = Point2::new(world.ego_heading.cos(), world.ego_heading.sin());
    world.ego_position + heading * (speed * world.dt)
}

/// Run one closed-loop episode: replan on schedule, execute the next
/// waypoint of the adopted plan (or the braking fallback while
/// delegated), stop at first collision or the frame budget.
pub fn run_episode(
    cfg: &EnvConfig,
    pipeline: &PipelineConfig,
    scorer: &dyn Scorer,
) -> Result<EpisodeLog, EpisodeError> {
    let mut world = env_init(cfg);
    let mut log = EpisodeLog {
        decisions: Vec::new(),
        first_collision_frame: None,
        success: true,
        hud_count: 0,
        frames: cfg.frames,
    };
    let mut plan: Option<(crate::scene::Trajectory, usize)> = None;
    for frame in 0..cfg.frames {
        if frame % cfg.replan_every.max(1) == 0 {
            let scene = scene_from_world(&world);
            let decision = plan_once(&scene, pipeline, scorer)?;
            if decision.outcome.is_delegate() {
                log.hud_count += 1;
                plan = None;
            } else {
                plan = decision.outcome.adopted().map(|t| (t.clone(), 0usize));
            }
            log.decisions.push(DecisionRecord::from_decision(
                format!("frame-{frame}"),
                &decision,
            ));
        }
        let target = match plan.as_mut() {
            Some((trajectory, step)) => {
                let index = (*step).min(trajectory.len() - 1);
                *step += 1;
                from_ego_frame(&world, trajectory.point(index))
            }
            None => brake_target(&world),
        };
        world = env_step(&world, target);
        if world.collided {
            log.first_collision_frame = Some(frame);
            log.success = false;
            break;
        }
    }
    Ok(log)
}
