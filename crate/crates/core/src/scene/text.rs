//! Structured text form of a [`Scene`]: one document per scene, the
//! same field order the planner prompts use (perception list, ego
//! states, history, mission goal). Numbers render with two decimals.
//!
//! Parsing is lossy where the text is: agent motion is given by the
//! track endpoint, so predicted tracks come back as straight-line
//! interpolations over the horizon, radii fall back to kind defaults,
//! and agent ids are re-assigned positionally.

use super::{
    history_at_constant_speed, AgentKind, AgentTrack, EgoState, Goal, Scene, SceneError, HORIZON,
};
use crate::geom::Point2;
use regex::Regex;
use std::fmt::Write as _;
use std::sync::OnceLock;

pub(crate) const PERCEPTION_HEADER: &str = "Perception and Prediction:";
pub(crate) const EGO_HEADER: &str = "Ego-States:";
pub(crate) const HISTORY_HEADER: &str = "Historical Trajectory (last 2 seconds):";
pub(crate) const GOAL_HEADER: &str = "Mission Goal:";

fn fmt2(p: Point2) -> String {
    format!("({:.2}, {:.2})", p.x, p.y)
}

/// Render a scene into its structured text document.
pub fn scene_to_text(scene: &Scene) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{PERCEPTION_HEADER}");
    if scene.agents.is_empty() {
        let _ = writeln!(out, " - none.");
    } else {
        for agent in &scene.agents {
            if agent.is_stationary() {
                let _ = writeln!(
                    out,
                    " - {} at {}, stationary.",
                    agent.kind.name(),
                    fmt2(agent.current)
                );
            } else {
                let dest = agent.position_at(HORIZON - 1);
                let _ = writeln!(
                    out,
                    " - {} at {}, moving to {}.",
                    agent.kind.name(),
                    fmt2(agent.current),
                    fmt2(dest)
                );
            }
        }
    }
    let _ = writeln!(out, "{EGO_HEADER}");
    let _ = writeln!(out, " - Velocity (vx, vy): {}", fmt2(scene.ego.velocity));
    let _ = writeln!(
        out,
        " - Heading Angular Velocity (v_yaw): {:.2}",
        scene.ego.heading_rate
    );
    let _ = writeln!(
        out,
        " - Acceleration (ax, ay): {}",
        fmt2(scene.ego.acceleration)
    );
    let _ = writeln!(out, " - Heading Speed: ({:.2})", scene.ego.heading_speed);
    let _ = writeln!(out, " - Steering: ({:.2})", scene.ego.steering);
    let history = scene
        .history
        .iter()
        .map(|p| fmt2(*p))
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(out, "{HISTORY_HEADER} [{history}]");
    let _ = writeln!(out, "{GOAL_HEADER} {}", scene.goal.mission_text());
    out
}

fn agent_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?x)^\s*-\s*(?P<kind>[a-zA-Z_]+)\s+at\s+\(\s*(?P<x>-?[\d.]+)\s*,\s*(?P<y>-?[\d.]+)\s*\)\s*,\s*
              (?:stationary|moving\s+to\s+\(\s*(?P<dx>-?[\d.]+)\s*,\s*(?P<dy>-?[\d.]+)\s*\))\s*\.?\s*$",
        )
        .expect("agent line regex compiles")
    })
}

fn pair_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\(\s*(-?[0-9][\d.eE+-]*)\s*,\s*(-?[0-9][\d.eE+-]*)\s*\)")
            .expect("pair regex compiles")
    })
}

fn parse_f64(s: &str) -> Result<f64, SceneError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| SceneError::MalformedSceneText(format!("bad number: {s:?}")))
}

fn parse_pair(text: &str) -> Result<Point2, SceneError> {
    let caps = pair_re()
        .captures(text)
        .ok_or_else(|| SceneError::MalformedSceneText(format!("expected (x, y) in {text:?}")))?;
    Ok(Point2::new(parse_f64(&caps[1])?, parse_f64(&caps[2])?))
}

fn parse_kind(word: &str) -> AgentKind {
    match word.to_ascii_lowercase().as_str() {
        "vehicle" | "car" | "truck" | "bus" => AgentKind::Vehicle,
        "cyclist" | "bicycle" | "motorcycle" => AgentKind::Cyclist,
        "pedestrian" | "person" => AgentKind::Pedestrian,
        _ => AgentKind::Object,
    }
}

/// Parse a scene document produced by [`scene_to_text`] (or shaped like
/// the planner prompt inputs).
pub fn scene_from_text(text: &str) -> Result<Scene, SceneError> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Perception,
        Ego,
    }
    let mut section = Section::None;
    let mut agents: Vec<AgentTrack> = Vec::new();
    let mut velocity: Option<Point2> = None;
    let mut heading_rate = 0.0;
    let mut acceleration = Point2::ORIGIN;
    let mut heading_speed: Option<f64> = None;
    let mut steering = 0.0;
    let mut history: Option<Vec<Point2>> = None;
    let mut goal: Option<Goal> = None;

    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed == PERCEPTION_HEADER {
            section = Section::Perception;
            continue;
        }
        if trimmed == EGO_HEADER {
            section = Section::Ego;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("Historical Trajectory") {
            section = Section::None;
            let body = rest.split_once(':').map(|x| x.1).unwrap_or("");
            let points: Vec<Point2> = pair_re()
                .captures_iter(body)
                .map(|c| Ok(Point2::new(parse_f64(&c[1])?, parse_f64(&c[2])?)))
                .collect::<Result<_, SceneError>>()?;
            if points.len() != 4 {
                return Err(SceneError::MalformedSceneText(format!(
                    "history must have exactly 4 points, got {}",
                    points.len()
                )));
            }
            history = Some(points);
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix(GOAL_HEADER) {
            section = Section::None;
            goal = Some(match rest.trim().to_ascii_uppercase().as_str() {
                "GO STRAIGHT" | "STRAIGHT" | "FORWARD" => Goal::GoStraight,
                "LEFT" | "TURN LEFT" => Goal::Left,
                "RIGHT" | "TURN RIGHT" => Goal::Right,
                "STOP" => Goal::Stop,
                other => {
                    return Err(SceneError::MalformedSceneText(format!(
                        "unknown mission goal: {other:?}"
                    )))
                }
            });
            continue;
        }
        match section {
            Section::Perception => {
                if trimmed.starts_with('-') && trimmed.trim_start_matches('-').trim() == "none." {
                    continue;
                }
                let caps = agent_line_re().captures(trimmed).ok_or_else(|| {
                    SceneError::MalformedSceneText(format!("bad perception line: {trimmed:?}"))
                })?;
                let kind = parse_kind(&caps["kind"]);
                let current = Point2::new(parse_f64(&caps["x"])?, parse_f64(&caps["y"])?);
                let mut agent = AgentTrack::new(format!("agent-{}", agents.len()), kind, current);
                if let (Some(dx), Some(dy)) = (caps.name("dx"), caps.name("dy")) {
                    let dest = Point2::new(parse_f64(dx.as_str())?, parse_f64(dy.as_str())?);
                    let predicted = (0..HORIZON)
                        .map(|f| current.lerp(dest, (f + 1) as f64 / HORIZON as f64))
                        .collect();
                    agent = agent.with_predicted(predicted);
                }
                agents.push(agent);
            }
            Section::Ego => {
                let body = trimmed.trim_start_matches('-').trim();
                if let Some(rest) = body.strip_prefix("Velocity") {
                    velocity = Some(parse_pair(rest)?);
                } else if let Some(rest) = body.strip_prefix("Heading Angular Velocity") {
                    let value = rest.split_once(':').map(|x| x.1).unwrap_or("");
                    heading_rate = parse_f64(value.trim().trim_matches(['(', ')']))?;
                } else if let Some(rest) = body.strip_prefix("Acceleration") {
                    acceleration = parse_pair(rest)?;
                } else if let Some(rest) = body.strip_prefix("Heading Speed") {
                    let value = rest.split_once(':').map(|x| x.1).unwrap_or("");
                    heading_speed = Some(parse_f64(value.trim().trim_matches(['(', ')']))?);
                } else if let Some(rest) = body.strip_prefix("Steering") {
                    let value = rest.split_once(':').map(|x| x.1).unwrap_or("");
                    steering = parse_f64(value.trim().trim_matches(['(', ')']))?;
                } else if let Some(rest) = body.strip_prefix("Can Bus") {
                    // Present in some prompt exemplars; carried nowhere.
                    let _ = rest;
                }
            }
            Section::None => {
                return Err(SceneError::MalformedSceneText(format!(
                    "unexpected line outside any section: {trimmed:?}"
                )));
            }
        }
    }

    let velocity =
        velocity.ok_or_else(|| SceneError::MalformedSceneText("missing ego velocity".into()))?;
    let goal = goal.ok_or_else(|| SceneError::MalformedSceneText("missing mission goal".into()))?;
    let history_vec = history.unwrap_or_else(|| {
        history_at_constant_speed(velocity.norm(), super::DEFAULT_FRAME_DT).to_vec()
    });
    let mut history = [Point2::ORIGIN; 4];
    history.copy_from_slice(&history_vec);

    let mut ego = EgoState::new(velocity, heading_rate, acceleration);
    if let Some(hs) = heading_speed {
        ego.heading_speed = hs;
    }
    ego.steering = steering;
    Ok(Scene::new(ego, agents, history, goal))
}
