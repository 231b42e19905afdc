//! Planning-scene domain model and the metric primitives every later
//! stage consumes: displacement error, collision fraction, and path
//! similarity.
//!
//! Conventions: the ego vehicle sits at the origin facing +y at plan
//! time; trajectories are `HORIZON` waypoints at `DEFAULT_FRAME_DT`
//! second spacing (3 s ahead); agent footprints are discs.

mod text;

pub use text::{scene_from_text, scene_to_text};

use crate::geom::Point2;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

/// Waypoints per trajectory (3 s at 0.5 s cadence).
pub const HORIZON: usize = 6;

/// Seconds between consecutive waypoints / simulation frames.
pub const DEFAULT_FRAME_DT: f64 = 0.5;

/// Ego footprint disc radius, meters.
pub const DEFAULT_EGO_RADIUS: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("trajectory length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("trajectory must have at least one finite waypoint")]
    EmptyTrajectory,
    #[error("non-finite coordinate at waypoint {index}")]
    NonFiniteWaypoint { index: usize },
    #[error("similarity requires at least 2 paths, got {got}")]
    TooFewPaths { got: usize },
    #[error("malformed scene text: {0}")]
    MalformedSceneText(String),
}

/// Ego state at plan time. Position is always the origin; the frame is
/// rotated so the vehicle faces +y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub position: Point2,
    pub velocity: Point2,
    /// Heading angular velocity, rad/s.
    pub heading_rate: f64,
    pub acceleration: Point2,
    /// Scalar speed along the heading, m/s.
    pub heading_speed: f64,
    /// Steering signal, rad.
    pub steering: f64,
}

impl EgoState {
    pub fn new(velocity: Point2, heading_rate: f64, acceleration: Point2) -> Self {
        EgoState {
            position: Point2::ORIGIN,
            velocity,
            heading_rate,
            acceleration,
            heading_speed: velocity.norm(),
            steering: 0.0,
        }
    }

    /// Forward speed, m/s.
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

impl Default for EgoState {
    fn default() -> Self {
        EgoState::new(Point2::new(0.0, 5.0), 0.0, Point2::ORIGIN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Vehicle,
    Cyclist,
    Pedestrian,
    Object,
}

impl AgentKind {
    /// Default footprint disc radius by kind, meters.
    pub fn default_radius(self) -> f64 {
        match self {
            AgentKind::Vehicle => 1.0,
            AgentKind::Cyclist => 0.75,
            AgentKind::Pedestrian => 0.5,
            AgentKind::Object => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Vehicle => "vehicle",
            AgentKind::Cyclist => "cyclist",
            AgentKind::Pedestrian => "pedestrian",
            AgentKind::Object => "object",
        }
    }
}

/// One surrounding agent: current position plus its predicted motion,
/// one point per future frame on the trajectory cadence. A predicted
/// list shorter than the horizon means the agent holds its last known
/// position for the remaining frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrack {
    pub agent_id: String,
    pub kind: AgentKind,
    pub current: Point2,
    pub predicted: Vec<Point2>,
    pub radius: f64,
}

impl AgentTrack {
    pub fn new(agent_id: impl Into<String>, kind: AgentKind, current: Point2) -> Self {
        AgentTrack {
            agent_id: agent_id.into(),
            kind,
            current,
            predicted: Vec::new(),
            radius: kind.default_radius(),
        }
    }

    pub fn with_predicted(mut self, predicted: Vec<Point2>) -> Self {
        self.predicted = predicted;
        self
    }

    /// Position at future frame `frame` (0 = first trajectory waypoint).
    pub fn position_at(&self, frame: usize) -> Point2 {
        self.predicted
            .get(frame)
            .or_else(|| self.predicted.last())
            .copied()
            .unwrap_or(self.current)
    }

    pub fn is_stationary(&self) -> bool {
        self.predicted
            .iter()
            .all(|p| p.distance(self.current) < 1e-9)
    }
}

/// Mission goal for the next planning horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Goal {
    GoStraight,
    Left,
    Right,
    Stop,
}

impl Goal {
    pub fn mission_text(self) -> &'static str {
        match self {
            Goal::GoStraight => "GO STRAIGHT",
            Goal::Left => "LEFT",
            Goal::Right => "RIGHT",
            Goal::Stop => "STOP",
        }
    }
}

/// A fixed-horizon trajectory: `HORIZON` waypoints in the ego frame,
/// the first waypoint one frame ahead of plan time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    waypoints: Vec<Point2>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Point2>) -> Result<Self, SceneError> {
        if waypoints.is_empty() {
            return Err(SceneError::EmptyTrajectory);
        }
        for (index, p) in waypoints.iter().enumerate() {
            if !p.is_finite() {
                return Err(SceneError::NonFiniteWaypoint { index });
            }
        }
        Ok(Trajectory { waypoints })
    }

    pub fn points(&self) -> &[Point2] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn point(&self, index: usize) -> Point2 {
        self.waypoints[index]
    }

    pub fn last(&self) -> Point2 {
        *self.waypoints.last().expect("trajectory is non-empty")
    }

    /// Speed over the final segment, m/s, given the waypoint cadence.
    pub fn final_speed(&self, dt: f64) -> f64 {
        if self.waypoints.len() < 2 {
            return 0.0;
        }
        let n = self.waypoints.len();
        self.waypoints[n - 1].distance(self.waypoints[n - 2]) / dt
    }
}

/// One planning instant: ego state, surrounding agents with predicted
/// motion, the recent ego history, and the mission goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub ego: EgoState,
    pub agents: Vec<AgentTrack>,
    /// Past 2 s of ego motion: exactly 4 points, oldest first.
    pub history: [Point2; 4],
    pub goal: Goal,
    pub frame_dt: f64,
}

impl Scene {
    pub fn new(ego: EgoState, agents: Vec<AgentTrack>, history: [Point2; 4], goal: Goal) -> Self {
        Scene {
            ego,
            agents,
            history,
            goal,
            frame_dt: DEFAULT_FRAME_DT,
        }
    }

    /// An agent-free straight-road scene, useful as a fixture.
    pub fn open_road(speed: f64, goal: Goal) -> Self {
        let ego = EgoState::new(Point2::new(0.0, speed), 0.0, Point2::ORIGIN);
        let history = history_at_constant_speed(speed, DEFAULT_FRAME_DT);
        Scene::new(ego, Vec::new(), history, goal)
    }
}

/// History of a vehicle that has been driving straight at `speed` for
/// the past 2 s, sampled at 0.5 s (4 points, oldest first).
pub fn history_at_constant_speed(speed: f64, dt: f64) -> [Point2; 4] {
    let mut history = [Point2::ORIGIN; 4];
    for (i, slot) in history.iter_mut().enumerate() {
        let t = (4 - i) as f64 * dt;
        *slot = Point2::new(0.0, -speed * t);
    }
    history
}

type RulePredicate = Arc<dyn Fn(&Trajectory, &Scene) -> bool + Send + Sync>;

/// Safety judgment over (trajectory, scene): collision avoidance, rule
/// compliance, and a clearance margin. A trajectory is safe iff all
/// three predicates hold.
#[derive(Clone)]
pub struct SafetyOracle {
    pub ego_radius: f64,
    /// Extra clearance beyond disc contact required by `margin_ok`, meters.
    pub margin: f64,
    rule: Option<RulePredicate>,
}

impl SafetyOracle {
    pub fn new(ego_radius: f64, margin: f64) -> Self {
        SafetyOracle {
            ego_radius,
            margin,
            rule: None,
        }
    }

    /// Replace the default always-true rule-compliance predicate.
    pub fn with_rule(
        mut self,
        rule: impl Fn(&Trajectory, &Scene) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.rule = Some(Arc::new(rule));
        self
    }

    pub fn collision_free(&self, trajectory: &Trajectory, scene: &Scene) -> bool {
        collision_fraction_with_radius(trajectory, scene, self.ego_radius) == 0.0
    }

    pub fn rule_compliant(&self, trajectory: &Trajectory, scene: &Scene) -> bool {
        match &self.rule {
            Some(rule) => rule(trajectory, scene),
            None => true,
        }
    }

    pub fn margin_ok(&self, trajectory: &Trajectory, scene: &Scene) -> bool {
        min_clearance(trajectory, scene, self.ego_radius) >= self.margin
    }

    pub fn is_safe(&self, trajectory: &Trajectory, scene: &Scene) -> bool {
        self.collision_free(trajectory, scene)
            && self.rule_compliant(trajectory, scene)
            && self.margin_ok(trajectory, scene)
    }
}

impl Default for SafetyOracle {
    fn default() -> Self {
        SafetyOracle::new(DEFAULT_EGO_RADIUS, 0.0)
    }
}

impl std::fmt::Debug for SafetyOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SafetyOracle")
            .field("ego_radius", &self.ego_radius)
            .field("margin", &self.margin)
            .field("rule", &self.rule.as_ref().map(|_| "<custom>"))
            .finish()
    }
}

/// L2 distance between planned and reference trajectories at the 1 s /
/// 2 s / 3 s marks plus the mean over all waypoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementErrors {
    pub l2_at_1s: f64,
    pub l2_at_2s: f64,
    pub l2_at_3s: f64,
    pub average: f64,
}

/// Per-waypoint Euclidean error between two equal-length trajectories
/// sampled at `dt` seconds. The per-second figures read the waypoint
/// closest to each mark.
pub fn displacement_errors(
    planned: &Trajectory,
    reference: &Trajectory,
    dt: f64,
) -> Result<DisplacementErrors, SceneError> {
    if planned.len() != reference.len() {
        return Err(SceneError::LengthMismatch {
            left: planned.len(),
            right: reference.len(),
        });
    }
    let distances: Vec<f64> = planned
        .points()
        .iter()
        .zip(reference.points())
        .map(|(p, q)| p.distance(*q))
        .collect();
    let at_seconds = |t: f64| {
        let index = ((t / dt).round() as usize)
            .saturating_sub(1)
            .min(distances.len() - 1);
        distances[index]
    };
    let average = distances.iter().sum::<f64>() / distances.len() as f64;
    Ok(DisplacementErrors {
        l2_at_1s: at_seconds(1.0),
        l2_at_2s: at_seconds(2.0),
        l2_at_3s: at_seconds(3.0),
        average,
    })
}

/// Fraction of scene agents whose disc the trajectory intersects at any
/// time-aligned frame. Empty scenes yield 0 (no agents, no risk).
pub fn collision_fraction(trajectory: &Trajectory, scene: &Scene) -> f64 {
    collision_fraction_with_radius(trajectory, scene, DEFAULT_EGO_RADIUS)
}

pub fn collision_fraction_with_radius(
    trajectory: &Trajectory,
    scene: &Scene,
    ego_radius: f64,
) -> f64 {
    if scene.agents.is_empty() {
        return 0.0;
    }
    let hits = scene
        .agents
        .iter()
        .filter(|agent| intersects_agent(trajectory, agent, ego_radius))
        .count();
    hits as f64 / scene.agents.len() as f64
}

fn intersects_agent(trajectory: &Trajectory, agent: &AgentTrack, ego_radius: f64) -> bool {
    let contact = ego_radius + agent.radius;
    trajectory
        .points()
        .iter()
        .enumerate()
        .any(|(frame, waypoint)| waypoint.distance(agent.position_at(frame)) <= contact)
}

/// Smallest clearance beyond disc contact over all (agent, frame)
/// pairs; +inf when the scene has no agents. Negative means overlap.
pub fn min_clearance(trajectory: &Trajectory, scene: &Scene, ego_radius: f64) -> f64 {
    scene
        .agents
        .iter()
        .flat_map(|agent| {
            trajectory
                .points()
                .iter()
                .enumerate()
                .map(move |(frame, waypoint)| {
                    waypoint.distance(agent.position_at(frame)) - (ego_radius + agent.radius)
                })
        })
        .fold(f64::INFINITY, f64::min)
}

/// Pairwise path similarity in [0, 1]. The default backend is the
/// geometric kernel below; alternatives (e.g. text-embedding cosine
/// over rationales) plug in behind this same contract.
pub trait SimilarityMeasure {
    fn measure(&self, p: &Trajectory, q: &Trajectory) -> Result<f64, SceneError>;
}

/// Geometric similarity kernel configuration: `Sim = exp(-ADE / sigma)`
/// where ADE is the mean pointwise distance between the two paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub sigma: f64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        // sigma = 2.0 puts Sim = 0.85 at roughly a 0.33 m mean deviation.
        SimilarityConfig { sigma: 2.0 }
    }
}

impl SimilarityMeasure for SimilarityConfig {
    fn measure(&self, p: &Trajectory, q: &Trajectory) -> Result<f64, SceneError> {
        similarity(p, q, self)
    }
}

/// Mean pointwise Euclidean distance between two equal-length paths.
pub fn average_displacement(p: &Trajectory, q: &Trajectory) -> Result<f64, SceneError> {
    if p.len() != q.len() {
        return Err(SceneError::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let total: f64 = p
        .points()
        .iter()
        .zip(q.points())
        .map(|(a, b)| a.distance(*b))
        .sum();
    Ok(total / p.len() as f64)
}

/// Similarity in [0, 1], monotonically non-increasing in ADE; 1 exactly
/// for identical paths.
pub fn similarity(
    p: &Trajectory,
    q: &Trajectory,
    cfg: &SimilarityConfig,
) -> Result<f64, SceneError> {
    let ade = average_displacement(p, q)?;
    Ok((-ade / cfg.sigma).exp())
}

/// Minimum similarity over all unordered pairs; the quantity the
/// decision stage compares against delta.
pub fn min_pairwise_similarity(
    paths: &[Trajectory],
    cfg: &SimilarityConfig,
) -> Result<f64, SceneError> {
    min_pairwise_similarity_with(paths, cfg)
}

/// [`min_pairwise_similarity`] under any similarity backend.
pub fn min_pairwise_similarity_with<M: SimilarityMeasure + ?Sized>(
    paths: &[Trajectory],
    backend: &M,
) -> Result<f64, SceneError> {
    if paths.len() < 2 {
        return Err(SceneError::TooFewPaths { got: paths.len() });
    }
    let mut min_sim = f64::INFINITY;
    for i in 0..paths.len() {
        for j in (i + 1)..paths.len() {
            let s = backend.measure(&paths[i], &paths[j])?;
            min_sim = min_sim.min(s);
        }
    }
    Ok(min_sim)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(points: &[(f64, f64)]) -> Trajectory {
        Trajectory::new(points.iter().map(|&(x, y)| Point2::new(x, y)).collect()).unwrap()
    }

    fn straight(speed: f64) -> Trajectory {
        traj(&[
            (0.0, speed * 0.5),
            (0.0, speed * 1.0),
            (0.0, speed * 1.5),
            (0.0, speed * 2.0),
            (0.0, speed * 2.5),
            (0.0, speed * 3.0),
        ])
    }

    #[test]
    fn displacement_identity_is_zero() {
        let t = straight(4.0);
        let d = displacement_errors(&t, &t, 0.5).unwrap();
        assert_eq!(d.l2_at_1s, 0.0);
        assert_eq!(d.l2_at_2s, 0.0);
        assert_eq!(d.l2_at_3s, 0.0);
        assert_eq!(d.average, 0.0);
    }

    #[test]
    fn displacement_uniform_offset() {
        let t = straight(4.0);
        let shifted = Trajectory::new(
            t.points()
                .iter()
                .map(|p| *p + Point2::new(1.0, 0.0))
                .collect(),
        )
        .unwrap();
        let d = displacement_errors(&shifted, &t, 0.5).unwrap();
        assert!((d.l2_at_1s - 1.0).abs() < 1e-12);
        assert!((d.l2_at_2s - 1.0).abs() < 1e-12);
        assert!((d.l2_at_3s - 1.0).abs() < 1e-12);
        assert!((d.average - 1.0).abs() < 1e-12);
    }

    #[test]
    fn displacement_matches_per_point_oracle() {
        // Fixed arbitrary pair; oracle is the literal per-waypoint sum.
        let p = traj(&[
            (0.3, 1.1),
            (-0.2, 2.7),
            (0.9, 3.3),
            (1.4, 4.0),
            (-1.0, 5.5),
            (0.0, 6.2),
        ]);
        let q = traj(&[
            (0.0, 1.0),
            (0.5, 2.0),
            (1.0, 3.0),
            (1.5, 4.5),
            (-0.5, 5.0),
            (0.2, 6.0),
        ]);
        let d = displacement_errors(&p, &q, 0.5).unwrap();

        let mut dists = Vec::new();
        for i in 0..6 {
            let dx = p.point(i).x - q.point(i).x;
            let dy = p.point(i).y - q.point(i).y;
            dists.push((dx * dx + dy * dy).sqrt());
        }
        let avg = dists.iter().sum::<f64>() / 6.0;
        assert!((d.l2_at_1s - dists[1]).abs() < 1e-12);
        assert!((d.l2_at_2s - dists[3]).abs() < 1e-12);
        assert!((d.l2_at_3s - dists[5]).abs() < 1e-12);
        assert!((d.average - avg).abs() < 1e-9);
    }

    #[test]
    fn displacement_length_mismatch_errors() {
        let p = straight(4.0);
        let q = traj(&[(0.0, 1.0), (0.0, 2.0)]);
        assert_eq!(
            displacement_errors(&p, &q, 0.5),
            Err(SceneError::LengthMismatch { left: 6, right: 2 })
        );
    }

    #[test]
    fn collision_fraction_count_ratio() {
        let t = straight(2.0);
        let mut scene = Scene::open_road(2.0, Goal::GoStraight);
        // One agent parked on the path, three far away.
        scene.agents = vec![
            AgentTrack::new("a0", AgentKind::Vehicle, Point2::new(0.0, 3.0)),
            AgentTrack::new("a1", AgentKind::Vehicle, Point2::new(50.0, 0.0)),
            AgentTrack::new("a2", AgentKind::Pedestrian, Point2::new(-40.0, 10.0)),
            AgentTrack::new("a3", AgentKind::Cyclist, Point2::new(30.0, -20.0)),
        ];
        assert!((collision_fraction(&t, &scene) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn collision_fraction_empty_scene_is_zero() {
        let t = straight(2.0);
        let scene = Scene::open_road(2.0, Goal::GoStraight);
        assert_eq!(collision_fraction(&t, &scene), 0.0);
    }

    #[test]
    fn collision_fraction_matches_brute_force_overlap_oracle() {
        // Three scripted agents crossing the path at known frames.
        let t = straight(2.0); // waypoints y = 1..6 step 1
        let mut scene = Scene::open_road(2.0, Goal::GoStraight);
        let cross = |y: f64, hit_frame: usize| -> Vec<Point2> {
            (0..HORIZON)
                .map(|f| {
                    if f == hit_frame {
                        Point2::new(0.0, y)
                    } else {
                        Point2::new(12.0, y)
                    }
                })
                .collect()
        };
        scene.agents = vec![
            AgentTrack::new("a0", AgentKind::Vehicle, Point2::new(12.0, 3.0))
                .with_predicted(cross(3.0, 2)),
            AgentTrack::new("a1", AgentKind::Cyclist, Point2::new(12.0, 6.0))
                .with_predicted(cross(6.0, 5)),
            AgentTrack::new("a2", AgentKind::Pedestrian, Point2::new(12.0, 40.0))
                .with_predicted(cross(40.0, 3)),
        ];

        // Brute-force oracle over every (agent, frame) pair.
        let mut hits = 0;
        for agent in &scene.agents {
            let mut hit = false;
            for frame in 0..t.len() {
                let pos = agent.position_at(frame);
                if t.point(frame).distance(pos) <= DEFAULT_EGO_RADIUS + agent.radius {
                    hit = true;
                }
            }
            if hit {
                hits += 1;
            }
        }
        let oracle = hits as f64 / scene.agents.len() as f64;
        assert!((oracle - 2.0 / 3.0).abs() < 1e-12);
        assert!((collision_fraction(&t, &scene) - oracle).abs() < 1e-12);
    }

    #[test]
    fn adding_an_agent_never_reduces_hits() {
        let t = straight(2.0);
        let mut scene = Scene::open_road(2.0, Goal::GoStraight);
        scene.agents = vec![AgentTrack::new(
            "a0",
            AgentKind::Vehicle,
            Point2::new(0.0, 2.0),
        )];
        let before = collision_fraction(&t, &scene) * scene.agents.len() as f64;
        scene.agents.push(AgentTrack::new(
            "a1",
            AgentKind::Vehicle,
            Point2::new(0.0, 4.0),
        ));
        let after = collision_fraction(&t, &scene) * scene.agents.len() as f64;
        assert!(after >= before);
    }

    #[test]
    fn similarity_identity_is_one() {
        let t = straight(3.0);
        let cfg = SimilarityConfig::default();
        assert_eq!(similarity(&t, &t, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn similarity_at_sigma_is_inverse_e() {
        // Uniform 2 m offset gives ADE = sigma = 2.
        let t = straight(3.0);
        let shifted = Trajectory::new(
            t.points()
                .iter()
                .map(|p| *p + Point2::new(2.0, 0.0))
                .collect(),
        )
        .unwrap();
        let cfg = SimilarityConfig::default();
        let s = similarity(&t, &shifted, &cfg).unwrap();
        assert!((s - (-1.0f64).exp()).abs() < 1e-12);
        assert!((s - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn similarity_strictly_decreases_when_a_waypoint_moves_away() {
        let p = straight(3.0);
        let mut pts: Vec<Point2> = p.points().to_vec();
        pts[4] = pts[4] + Point2::new(0.5, 0.0);
        let q1 = Trajectory::new(pts.clone()).unwrap();
        pts[4] = pts[4] + Point2::new(0.5, 0.0);
        let q2 = Trajectory::new(pts).unwrap();
        let cfg = SimilarityConfig::default();
        let s1 = similarity(&p, &q1, &cfg).unwrap();
        let s2 = similarity(&p, &q2, &cfg).unwrap();
        assert!(s2 < s1);
        assert!(s1 < 1.0);
    }

    #[test]
    fn min_pairwise_identical_paths() {
        let t = straight(3.0);
        let cfg = SimilarityConfig::default();
        let m = min_pairwise_similarity(&[t.clone(), t.clone(), t], &cfg).unwrap();
        assert_eq!(m, 1.0);
    }

    #[test]
    fn min_pairwise_matches_pairwise_enumeration() {
        // Two identical paths plus one at ADE = sigma from both.
        let t = straight(3.0);
        let far = Trajectory::new(
            t.points()
                .iter()
                .map(|p| *p + Point2::new(2.0, 0.0))
                .collect(),
        )
        .unwrap();
        let cfg = SimilarityConfig::default();
        let m = min_pairwise_similarity(&[t.clone(), t.clone(), far], &cfg).unwrap();
        assert!((m - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn min_pairwise_superset_is_no_larger() {
        let a = straight(3.0);
        let b = Trajectory::new(
            a.points()
                .iter()
                .map(|p| *p + Point2::new(0.4, 0.0))
                .collect(),
        )
        .unwrap();
        let c = Trajectory::new(
            a.points()
                .iter()
                .map(|p| *p + Point2::new(3.0, 0.0))
                .collect(),
        )
        .unwrap();
        let cfg = SimilarityConfig::default();
        let subset = min_pairwise_similarity(&[a.clone(), b.clone()], &cfg).unwrap();
        let superset = min_pairwise_similarity(&[a, b, c], &cfg).unwrap();
        assert!(superset <= subset);
    }

    #[test]
    fn alternative_similarity_backends_plug_in() {
        // A backend that only compares final headings, standing in for
        // a text-embedding measure.
        struct EndpointBackend;
        impl SimilarityMeasure for EndpointBackend {
            fn measure(&self, p: &Trajectory, q: &Trajectory) -> Result<f64, SceneError> {
                Ok((-p.last().distance(q.last())).exp())
            }
        }
        let a = straight(3.0);
        let b = Trajectory::new(
            a.points()
                .iter()
                .map(|p| *p + Point2::new(0.5, 0.0))
                .collect(),
        )
        .unwrap();
        let m = min_pairwise_similarity_with(&[a, b], &EndpointBackend).unwrap();
        assert!((m - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn min_pairwise_requires_two_paths() {
        let t = straight(3.0);
        let cfg = SimilarityConfig::default();
        assert_eq!(
            min_pairwise_similarity(std::slice::from_ref(&t), &cfg),
            Err(SceneError::TooFewPaths { got: 1 })
        );
    }

    #[test]
    fn zero_margin_oracle_reduces_to_collision_fraction() {
        let oracle = SafetyOracle::default();
        let t = straight(2.0);
        let mut scene = Scene::open_road(2.0, Goal::GoStraight);
        assert!(oracle.collision_free(&t, &scene));
        assert!(oracle.is_safe(&t, &scene));

        scene.agents = vec![AgentTrack::new(
            "a0",
            AgentKind::Vehicle,
            Point2::new(0.0, 3.0),
        )];
        assert_eq!(
            oracle.collision_free(&t, &scene),
            collision_fraction(&t, &scene) == 0.0
        );
        assert!(!oracle.is_safe(&t, &scene));
    }

    #[test]
    fn margin_rejects_close_passes() {
        let t = straight(2.0);
        let mut scene = Scene::open_road(2.0, Goal::GoStraight);
        // 2.2 m lateral pass: 0.2 m beyond vehicle contact distance.
        scene.agents = vec![AgentTrack::new(
            "a0",
            AgentKind::Vehicle,
            Point2::new(2.2, 2.0),
        )];
        let tight = SafetyOracle::new(DEFAULT_EGO_RADIUS, 0.0);
        let wide = SafetyOracle::new(DEFAULT_EGO_RADIUS, 0.5);
        assert!(tight.is_safe(&t, &scene));
        assert!(!wide.margin_ok(&t, &scene));
        assert!(!wide.is_safe(&t, &scene));
    }

    #[test]
    fn custom_rule_is_honored() {
        let oracle = SafetyOracle::default().with_rule(|_, _| false);
        let t = straight(2.0);
        let scene = Scene::open_road(2.0, Goal::GoStraight);
        assert!(!oracle.rule_compliant(&t, &scene));
        assert!(!oracle.is_safe(&t, &scene));
    }

    #[test]
    fn trajectory_rejects_non_finite() {
        let err = Trajectory::new(vec![Point2::new(0.0, f64::NAN)]).unwrap_err();
        assert_eq!(err, SceneError::NonFiniteWaypoint { index: 0 });
    }

    #[test]
    fn agent_holds_last_known_position() {
        let agent = AgentTrack::new("a", AgentKind::Vehicle, Point2::new(1.0, 1.0))
            .with_predicted(vec![Point2::new(1.0, 2.0), Point2::new(1.0, 3.0)]);
        assert_eq!(agent.position_at(1), Point2::new(1.0, 3.0));
        assert_eq!(agent.position_at(5), Point2::new(1.0, 3.0));
        let bare = AgentTrack::new("b", AgentKind::Vehicle, Point2::new(4.0, 4.0));
        assert_eq!(bare.position_at(3), Point2::new(4.0, 4.0));
    }
}
