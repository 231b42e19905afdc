//! Stage 1: produce `k` candidate paths with rationales.
//!
//! Two backends sit behind one contract: a deterministic synthetic
//! generator built from maneuver templates (keep-lane, shift-left,
//! shift-right, decelerate-stop, accelerate) for benches and tests, and
//! a prompt builder / output parser pair for external language-model
//! backends driven by the CLI adapter.

use crate::geom::Point2;
use crate::scene::{scene_to_text, Goal, Scene, Trajectory, HORIZON};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fmt::Write as _;
use std::sync::OnceLock;
use thiserror::Error;

/// Single-letter option label, `A` through `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OptionLabel(char);

impl OptionLabel {
    pub fn from_index(index: usize) -> Option<OptionLabel> {
        (index < 26).then(|| OptionLabel((b'A' + index as u8) as char))
    }

    pub fn from_char(c: char) -> Option<OptionLabel> {
        c.is_ascii_uppercase().then_some(OptionLabel(c))
    }

    pub fn index(self) -> usize {
        (self.0 as u8 - b'A') as usize
    }

    pub fn as_char(self) -> char {
        self.0
    }
}

impl fmt::Display for OptionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One candidate: a trajectory, the generator's rationale and
/// meta-action text, and the option label assigned when the set is
/// framed as a multiple-choice question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePath {
    pub trajectory: Trajectory,
    pub rationale: String,
    pub meta_action: String,
    pub label: Option<OptionLabel>,
}

impl CandidatePath {
    pub fn new(
        trajectory: Trajectory,
        rationale: impl Into<String>,
        meta_action: impl Into<String>,
    ) -> Self {
        CandidatePath {
            trajectory,
            rationale: rationale.into(),
            meta_action: meta_action.into(),
            label: None,
        }
    }
}

/// An ordered, labeled set of candidates for one scene. Labels follow
/// list order (`A`, `B`, `C`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub scene: Scene,
    pub candidates: Vec<CandidatePath>,
    /// Index of the injected reference candidate, when present.
    pub ground_truth_index: Option<usize>,
}

impl CandidateSet {
    pub fn new(scene: Scene, mut candidates: Vec<CandidatePath>) -> Self {
        for (i, c) in candidates.iter_mut().enumerate() {
            c.label = OptionLabel::from_index(i);
        }
        CandidateSet {
            scene,
            candidates,
            ground_truth_index: None,
        }
    }

    /// Append the reference trajectory as an extra candidate under the
    /// next unused label, for coverage measurement. Its rationale is
    /// intentionally empty.
    pub fn inject_ground_truth(&mut self, reference: Trajectory) {
        let index = self.candidates.len();
        let mut path = CandidatePath::new(reference, "", "maintain course toward the mission goal");
        path.label = OptionLabel::from_index(index);
        self.candidates.push(path);
        self.ground_truth_index = Some(index);
    }

    pub fn ground_truth_label(&self) -> Option<OptionLabel> {
        self.ground_truth_index
            .and_then(|i| self.candidates[i].label)
    }

    pub fn k(&self) -> usize {
        self.candidates.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorBackend {
    Synthetic,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Number of candidates to produce (>= 2).
    pub k: usize,
    pub seed: u64,
    /// Lateral jitter applied to maneuver templates, meters.
    pub maneuver_jitter: f64,
    pub backend: GeneratorBackend,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            k: 4,
            seed: 0,
            maneuver_jitter: 0.3,
            backend: GeneratorBackend::Synthetic,
        }
    }
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("generation backend error: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Maneuver {
    KeepLane,
    Accelerate,
    DecelerateStop,
    ShiftLeft,
    ShiftRight,
}

impl Maneuver {
    fn meta_action(self) -> &'static str {
        match self {
            Maneuver::KeepLane => "keep lane, maintain speed",
            Maneuver::Accelerate => "accelerate and pass ahead",
            Maneuver::DecelerateStop => "decelerate to a complete stop",
            Maneuver::ShiftLeft => "shift position leftwards",
            Maneuver::ShiftRight => "shift position rightwards",
        }
    }

    fn rationale(self) -> &'static str {
        match self {
            Maneuver::KeepLane => {
                "The forward corridor stays clear at the current speed; holding the lane keeps the ride predictable for surrounding agents."
            }
            Maneuver::Accelerate => {
                "Clearing the interaction zone early reduces exposure time; a moderate speed increase stays within comfort limits."
            }
            Maneuver::DecelerateStop => {
                "Braking to a stop removes all movement conflicts and yields the right of way until the area clears."
            }
            Maneuver::ShiftLeft => {
                "Moving left opens a buffer from traffic on the right side while keeping progress toward the goal."
            }
            Maneuver::ShiftRight => {
                "Moving right opens a buffer from traffic on the left side while keeping progress toward the goal."
            }
        }
    }
}

/// Goal-conditioned template priority; the first entry doubles as the
/// greedy baseline's choice.
fn template_order(goal: Goal) -> [Maneuver; 5] {
    use Maneuver::*;
    match goal {
        Goal::GoStraight => [KeepLane, DecelerateStop, ShiftLeft, ShiftRight, Accelerate],
        Goal::Left => [ShiftLeft, KeepLane, DecelerateStop, ShiftRight, Accelerate],
        Goal::Right => [ShiftRight, KeepLane, DecelerateStop, ShiftLeft, Accelerate],
        Goal::Stop => [DecelerateStop, KeepLane, ShiftLeft, ShiftRight, Accelerate],
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

fn template_trajectory(
    maneuver: Maneuver,
    goal: Goal,
    speed: f64,
    dt: f64,
    lateral_jitter: f64,
    speed_scale: f64,
) -> Trajectory {
    let horizon_s = HORIZON as f64 * dt;
    let v = speed * speed_scale;
    // A halted vehicle resumes a slow cruise instead of holding forever.
    let cruise = v.max(2.0 * speed_scale);
    let mut points = Vec::with_capacity(HORIZON);
    for i in 0..HORIZON {
        let t = (i + 1) as f64 * dt;
        let point = match maneuver {
            Maneuver::KeepLane => Point2::new(0.0, cruise * t),
            Maneuver::Accelerate => {
                let a = 1.5 * speed_scale;
                Point2::new(0.0, cruise * t + 0.5 * a * t * t)
            }
            Maneuver::DecelerateStop => {
                // Constant-rate braking to a full stop; re-planning the
                // first waypoint then sheds a fixed speed per frame
                // instead of decaying geometrically and creeping.
                let brake = 4.0;
                let stop_t = v / brake;
                let tc = t.min(stop_t);
                Point2::new(0.0, v * tc - 0.5 * brake * tc * tc)
            }
            Maneuver::ShiftLeft | Maneuver::ShiftRight => {
                // Goal-sized lateral move with a smooth ramp.
                let base = match (maneuver, goal) {
                    (Maneuver::ShiftLeft, Goal::Left) => 3.5,
                    (Maneuver::ShiftRight, Goal::Right) => 3.5,
                    _ => 1.0,
                };
                let magnitude = (base + lateral_jitter).max(0.25);
                let sign = if maneuver == Maneuver::ShiftLeft {
                    -1.0
                } else {
                    1.0
                };
                Point2::new(sign * magnitude * smoothstep(t / horizon_s), cruise * t)
            }
        };
        points.push(point);
    }
    Trajectory::new(points).expect("templates produce finite waypoints")
}

/// Produce `k` candidates for the scene. The synthetic backend draws
/// maneuver templates in goal priority order with seeded jitter and is
/// bit-deterministic for a fixed (scene, seed). The external backend
/// must be driven through the prompt builder and an adapter; calling it
/// here reports a backend error.
pub fn generate_candidates(
    scene: &Scene,
    cfg: &GeneratorConfig,
) -> Result<CandidateSet, GenerateError> {
    if cfg.k < 2 {
        return Err(GenerateError::InvalidConfig(format!(
            "k must be >= 2, got {}",
            cfg.k
        )));
    }
    if cfg.backend == GeneratorBackend::External {
        return Err(GenerateError::Backend(
            "external generation needs a transport; drive it through the CLI adapter".into(),
        ));
    }
    let order = template_order(scene.goal);
    let speed = scene.ego.speed();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut candidates = Vec::with_capacity(cfg.k);
    for i in 0..cfg.k {
        let maneuver = order[i % order.len()];
        let variant = i / order.len();
        let (lateral_jitter, speed_scale) = if cfg.maneuver_jitter > 0.0 {
            let j = cfg.maneuver_jitter;
            (
                rng.random_range(-j..=j) + variant as f64 * 0.5,
                1.0 + rng.random_range(-j..=j) * 0.1 + variant as f64 * 0.05,
            )
        } else {
            (variant as f64 * 0.5, 1.0 + variant as f64 * 0.05)
        };
        let trajectory = template_trajectory(
            maneuver,
            scene.goal,
            speed,
            scene.frame_dt,
            lateral_jitter,
            speed_scale,
        );
        let mut rationale = maneuver.rationale().to_string();
        if variant > 0 {
            let _ = write!(rationale, " (variant {variant})");
        }
        candidates.push(CandidatePath::new(
            trajectory,
            rationale,
            maneuver.meta_action(),
        ));
    }
    Ok(CandidateSet::new(scene.clone(), candidates))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }
}

/// The unit handed to a language-model backend: system text, few-shot
/// exchange, and the serialized scene as the final user message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub few_shots: Vec<ChatMessage>,
    pub user: String,
}

impl PromptBundle {
    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut messages = vec![ChatMessage::new(Role::System, self.system.clone())];
        messages.extend(self.few_shots.iter().cloned());
        messages.push(ChatMessage::new(Role::User, self.user.clone()));
        messages
    }
}

/// Worked example shown to the generation backend: the input document.
pub const FEW_SHOT_USER: &str = "\
Perception and Prediction:
 - Vehicle at (-4.0, 2.0), stationary.
 - Cyclist at (2.0, 5.0), moving to (2.5, 7.0).
Ego-States:
 - Velocity (vx, vy): (0.00, 1.20)
 - Heading Angular Velocity (v_yaw): 0.05
 - Acceleration (ax, ay): (0.02, -0.01)
Historical Trajectory: [(0.0, -5.0), (0.1, -4.0), (0.2, -3.0), (0.3, -2.0)]
Mission Goal: GO STRAIGHT
";

/// Worked example shown to the generation backend: the expected answer.
pub const FEW_SHOT_ASSISTANT: &str = "\
my predicted 4 paths are
Path 1:
 - Thought Process: Notable Objects: stationary vehicle, and cyclist. Potential Effects: Risk of collision with the cyclist if they intersect our path.
 - Reasoning: The cyclist is moving parallel but could swerve; maintaining awareness is crucial. The stationary vehicle poses no immediate threat.
 - Meta Action: Decelerate slightly to yield to the cyclist, maintain lane position, and proceed cautiously.
 - Trajectory: [(0.0, 1.0), (0.0, 2.0), (0.0, 3.0), (0.0, 4.0), (0.0, 5.0), (0.0, 6.0)]

Path 2:
 - Thought Process: Notable Objects: cyclist. Potential Effects: Shifting lanes could provide additional safety.
 - Reasoning: Moving slightly to the right creates space from the cyclist. Ensures a buffer zone, reducing the risk of collision.
 - Meta Action: Adjust position rightwards while maintaining speed.
 - Trajectory: [(0.5, 1.0), (0.5, 2.0), (0.5, 3.0), (0.5, 4.0), (0.5, 5.0), (0.5, 6.0)]

Path 3:
 - Thought Process: Notable Objects: cyclist. Potential Effects: Stopping allows both to clear the area.
 - Reasoning: A brief stop ensures maximum safety, eliminating movement conflicts. After they pass, proceed to accelerate.
 - Meta Action: Come to a complete stop, then resume driving after clearance.
 - Trajectory: [(0.0, 0.5), (0.0, 1.0), (0.0, 1.5), (0.0, 2.0), (0.0, 4.0), (0.0, 6.0)]

Path 4:
 - Thought Process: Notable Objects: cyclist. Potential Effects: Overtaking the cyclist cautiously.
 - Reasoning: Accelerating slightly to pass the cyclist before potential path crossing. Ensures we're ahead and reduces interaction time.
 - Meta Action: Increase speed moderately to overtake the cyclist safely.
 - Trajectory: [(0.0, 1.5), (0.0, 3.0), (0.0, 4.5), (0.0, 6.0), (0.0, 7.5), (0.0, 9.0)]
";

fn generation_system_prompt(k: usize, horizon_s: f64) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "**Autonomous Driving Planner**
Role: You are the brain of an autonomous vehicle. Plan {k} unique, collision-free, safe, and feasible {horizon_s}-second driving trajectory using {H} new waypoints for each, with each plan including the Thought Process, Reasoning, Meta Action, and Trajectory. Avoid collisions with other objects.

Context
- Coordinates: X-axis is perpendicular, and Y-axis is parallel to the direction you're facing. You're at point (0,0).

Inputs
1. Perception & Prediction: Info about surrounding objects and their predicted movements.
2. Historical Trajectory: Your past 2-second route, given by 4 waypoints.
3. Ego-States: Your current state including velocity, heading angular velocity, can bus data, heading speed, and steering signal.
4. Mission Goal: Goal location for the next {horizon_s} seconds.

Task
- Thought Process: Note down critical objects and potential effects from your perceptions and predictions. Identify immediate risks.
- Reasoning: Provide a deeper analysis of the situation, explaining why certain actions are chosen over others based on predicted outcomes, potential risks, and goal alignment.
- Action Plan: Detail your meta-actions based on your reasoning and thought process.
- Trajectory Planning: Develop {k} unique, safe, and feasible {horizon_s}-second routes using {H} new waypoints for each, with each plan including the Thought Process, Reasoning, Meta Action, and Trajectory.

Output:
my predicted {k} paths are
",
        k = k,
        horizon_s = horizon_s,
        H = HORIZON,
    );
    for i in 1..=k {
        if i <= 2 {
            let _ = write!(
                out,
                "Path {i}:
- Thoughts:
  - Notable Objects
    Potential Effects
- Reasoning
- Meta Action
- Trajectories (MOST IMPORTANT):
  - [(x1,y1), (x2,y2), ... , (x{H},y{H})]

",
                i = i,
                H = HORIZON,
            );
        } else {
            let _ = write!(out, "Path {i}:\n...\n\n");
        }
    }
    out.truncate(out.trim_end().len());
    out.push('\n');
    out
}

/// Render the system message, few-shot exchange, and serialized scene
/// for the generation backend. Pure: the same scene yields the same
/// bytes.
pub fn build_generation_prompt(scene: &Scene, cfg: &GeneratorConfig) -> PromptBundle {
    let horizon_s = HORIZON as f64 * scene.frame_dt;
    PromptBundle {
        system: generation_system_prompt(cfg.k, horizon_s),
        few_shots: vec![
            ChatMessage::new(Role::User, FEW_SHOT_USER),
            ChatMessage::new(Role::Assistant, FEW_SHOT_ASSISTANT),
        ],
        user: scene_to_text(scene),
    }
}

/// Serialize a candidate set into the output schema the generation
/// backend is asked for. Waypoints print at full precision so the text
/// form re-parses to exactly the same trajectories.
pub fn render_paths_text(set: &CandidateSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "my predicted {} paths are", set.candidates.len());
    for (i, candidate) in set.candidates.iter().enumerate() {
        let _ = writeln!(out, "Path {}:", i + 1);
        let _ = writeln!(out, " - Reasoning: {}", candidate.rationale);
        let _ = writeln!(out, " - Meta Action: {}", candidate.meta_action);
        let waypoints = candidate
            .trajectory
            .points()
            .iter()
            .map(|p| format!("({}, {})", p.x, p.y))
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, " - Trajectory: [{waypoints}]");
        let _ = writeln!(out);
    }
    out
}

/// One unparseable path block: which `Path N:` it was and why it was
/// dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathIssue {
    pub path_number: usize,
    pub reason: String,
}

/// Parser output: the paths that survived plus a report of the ones
/// that did not.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPaths {
    pub paths: Vec<CandidatePath>,
    pub rejected: Vec<PathIssue>,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("no `Path N:` blocks found in backend output")]
    NoPathBlocks,
    #[error("fewer than 2 parseable paths (got {parsed}); issues: {issues:?}")]
    TooFewParseable {
        parsed: usize,
        issues: Vec<PathIssue>,
    },
}

fn path_marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^\s*(?:-\s*)?Path\s+(\d+)\s*:").expect("path marker regex"))
}

fn field_line_re(field: &str) -> Regex {
    Regex::new(&format!(r"(?mi)^\s*-?\s*{field}\s*:?\s*(.*)$")).expect("field regex")
}

fn trajectory_label_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)Trajector(?:y|ies)[^:\[\n]*:?").expect("trajectory regex"))
}

fn coordinate_pairs(bracket_body: &str, path_number: usize) -> Result<Vec<Point2>, PathIssue> {
    static PAIR: OnceLock<Regex> = OnceLock::new();
    let pair = PAIR.get_or_init(|| Regex::new(r"\(([^()]*)\)").expect("tuple regex"));
    let mut points = Vec::new();
    for caps in pair.captures_iter(bracket_body) {
        let inner = &caps[1];
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(PathIssue {
                path_number,
                reason: format!("waypoint {:?} is not an (x, y) pair", inner),
            });
        }
        let x = parts[0].parse::<f64>();
        let y = parts[1].parse::<f64>();
        match (x, y) {
            (Ok(x), Ok(y)) if x.is_finite() && y.is_finite() => points.push(Point2::new(x, y)),
            _ => {
                return Err(PathIssue {
                    path_number,
                    reason: format!("non-numeric coordinates in {:?}", inner),
                })
            }
        }
    }
    Ok(points)
}

fn parse_block(block: &str, path_number: usize) -> Result<CandidatePath, PathIssue> {
    let label_match = trajectory_label_re().find(block).ok_or_else(|| PathIssue {
        path_number,
        reason: "missing Trajectory field".into(),
    })?;
    let after = &block[label_match.end()..];
    let open = after.find('[').ok_or_else(|| PathIssue {
        path_number,
        reason: "missing `[` after Trajectory field".into(),
    })?;
    let close = after[open..].find(']').ok_or_else(|| PathIssue {
        path_number,
        reason: "missing `]` closing the waypoint list".into(),
    })? + open;
    let points = coordinate_pairs(&after[open..=close], path_number)?;
    if points.len() != HORIZON {
        return Err(PathIssue {
            path_number,
            reason: format!("expected {HORIZON} waypoints, found {}", points.len()),
        });
    }
    let trajectory = Trajectory::new(points).map_err(|e| PathIssue {
        path_number,
        reason: e.to_string(),
    })?;

    let capture_line = |field: &str| -> String {
        field_line_re(field)
            .captures(block)
            .map(|c| c[1].trim().to_string())
            .unwrap_or_default()
    };
    let rationale = capture_line("Reasoning");
    let meta_action = capture_line("Meta Action");
    Ok(CandidatePath::new(trajectory, rationale, meta_action))
}

/// Extract candidate paths from backend output text. Whitespace and
/// numbering variance are tolerated; blocks with a malformed or
/// wrong-length waypoint list are dropped and reported. Fewer than two
/// surviving paths is an error.
pub fn parse_generated_paths(text: &str) -> Result<ParsedPaths, ParseError> {
    let markers: Vec<_> = path_marker_re().captures_iter(text).collect();
    if markers.is_empty() {
        return Err(ParseError::NoPathBlocks);
    }
    let mut paths = Vec::new();
    let mut rejected = Vec::new();
    for (i, caps) in markers.iter().enumerate() {
        let start = caps.get(0).expect("capture 0 always present").end();
        let end = markers
            .get(i + 1)
            .map(|next| next.get(0).expect("capture 0 always present").start())
            .unwrap_or(text.len());
        let number = caps[1].parse::<usize>().unwrap_or(i + 1);
        match parse_block(&text[start..end], number) {
            Ok(path) => paths.push(path),
            Err(issue) => rejected.push(issue),
        }
    }
    if paths.len() < 2 {
        return Err(ParseError::TooFewParseable {
            parsed: paths.len(),
            issues: rejected,
        });
    }
    Ok(ParsedPaths { paths, rejected })
}
