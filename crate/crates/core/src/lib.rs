//! Conformal path planning: candidate generation, multiple-choice scoring,
//! split-conformal calibration, similarity-gated path decisions, and a
//! closed-loop desk-scale simulator.
//!
//! The pipeline has three stages:
//!
//! 1. **Generation** — produce `k` candidate trajectories with rationales
//!    ([`generation`]).
//! 2. **Selection** — frame the candidates as a multiple-choice question,
//!    score the options, and keep every option whose non-conformity score
//!    clears a calibrated threshold ([`scoring`], [`conformal`]). The
//!    resulting prediction set contains a safe option with probability at
//!    least `1 - alpha` under exchangeability.
//! 3. **Decision** — adopt the single member of the set, consolidate
//!    similar members, or delegate to a human when members diverge
//!    ([`decision`]).
//!
//! [`sim`] closes the loop: worlds replan every frame through the full
//! pipeline and report success rate and time to collision.

pub mod conformal;
pub mod decision;
pub mod generation;
pub mod geom;
pub mod scene;
pub mod scoring;
pub mod sim;

pub use conformal::{
    calibrate, calibrate_scores, evaluate_cp, predict_set, CalibratedThreshold, CalibrationRecord,
    ConformalError, CpMetrics, PredictionSet,
};
pub use decision::{
    aggregate, decide, singleton_decide, Decision, DecisionConfig, DecisionError, DecisionRecord,
    Evidence, Outcome, Strategy,
};
pub use generation::{
    build_generation_prompt, generate_candidates, parse_generated_paths, render_paths_text,
    CandidatePath, CandidateSet, ChatMessage, GenerateError, GeneratorBackend, GeneratorConfig,
    OptionLabel, ParseError, ParsedPaths, PromptBundle, Role,
};
pub use geom::Point2;
pub use scene::{
    collision_fraction, displacement_errors, min_pairwise_similarity, min_pairwise_similarity_with,
    scene_from_text, scene_to_text, similarity, AgentKind, AgentTrack, DisplacementErrors,
    EgoState, Goal, SafetyOracle, Scene, SceneError, SimilarityConfig, SimilarityMeasure,
    Trajectory, DEFAULT_EGO_RADIUS, DEFAULT_FRAME_DT, HORIZON,
};
pub use scoring::{
    build_mcqa, mock_score, nonconformity, softmax_probs, stable_hash64, McqaInstance, MockScorer,
    MockScorerConfig, NonconformityConfig, NonconformityKind, OptionScores, ScoreError, Scorer,
};
pub use sim::{
    env_init, env_step, run_episode, EnvConfig, EnvKind, EpisodeLog, ExecutionPolicy,
    PipelineConfig, SimAgent, WorldState,
};
