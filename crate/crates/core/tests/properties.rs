//! Property-based invariants across the pipeline primitives.

use calpath_core::{
    calibrate_scores, collision_fraction, displacement_errors, generate_candidates, nonconformity,
    similarity, softmax_probs, AgentKind, AgentTrack, GeneratorConfig, Goal, NonconformityConfig,
    OptionLabel, Point2, Scene, SimilarityConfig, Trajectory, HORIZON,
};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn trajectory_strategy() -> impl Strategy<Value = Trajectory> {
    prop::collection::vec((-30.0f64..30.0, -30.0f64..30.0), HORIZON).prop_map(|pts| {
        Trajectory::new(pts.into_iter().map(|(x, y)| Point2::new(x, y)).collect()).unwrap()
    })
}

fn scene_strategy() -> impl Strategy<Value = Scene> {
    (
        0.5f64..12.0,
        prop::collection::vec(
            (
                (-15.0f64..15.0),
                (0.0f64..25.0),
                (-3.0f64..3.0),
                (-3.0f64..3.0),
            ),
            0..6,
        ),
    )
        .prop_map(|(speed, agents)| {
            let mut scene = Scene::open_road(speed, Goal::GoStraight);
            scene.agents = agents
                .into_iter()
                .enumerate()
                .map(|(i, (x, y, vx, vy))| {
                    let current = Point2::new(x, y);
                    let velocity = Point2::new(vx, vy);
                    AgentTrack::new(format!("agent-{i}"), AgentKind::Vehicle, current)
                        .with_predicted(
                            (1..=HORIZON)
                                .map(|f| current + velocity * (0.5 * f as f64))
                                .collect(),
                        )
                })
                .collect();
            scene
        })
}

fn logits_strategy() -> impl Strategy<Value = BTreeMap<OptionLabel, f64>> {
    prop::collection::vec(-6.0f64..6.0, 2..=8).prop_map(|values| {
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| (OptionLabel::from_index(i).unwrap(), v))
            .collect()
    })
}

proptest! {
    #[test]
    fn similarity_is_symmetric_and_bounded(p in trajectory_strategy(), q in trajectory_strategy()) {
        let cfg = SimilarityConfig::default();
        let pq = similarity(&p, &q, &cfg).unwrap();
        let qp = similarity(&q, &p, &cfg).unwrap();
        prop_assert!((pq - qp).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert_eq!(similarity(&p, &p, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn collision_fraction_stays_in_unit_interval(t in trajectory_strategy(), scene in scene_strategy()) {
        let f = collision_fraction(&t, &scene);
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn displacement_average_is_the_mean(p in trajectory_strategy(), q in trajectory_strategy()) {
        let d = displacement_errors(&p, &q, 0.5).unwrap();
        let mean: f64 = p
            .points()
            .iter()
            .zip(q.points())
            .map(|(a, b)| a.distance(*b))
            .sum::<f64>()
            / HORIZON as f64;
        prop_assert!((d.average - mean).abs() < 1e-9);
    }

    #[test]
    fn probabilities_sum_to_one(logits in logits_strategy()) {
        let probs = softmax_probs(&logits).unwrap();
        let sum: f64 = probs.values().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lac_decreases_as_probability_increases(logits in logits_strategy()) {
        let probs = softmax_probs(&logits).unwrap();
        let cfg = NonconformityConfig::lac();
        let mut pairs: Vec<(f64, f64)> = probs
            .iter()
            .map(|(l, p)| (*p, nonconformity(&probs, *l, &cfg).unwrap()))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in pairs.windows(2) {
            prop_assert!(w[1].1 <= w[0].1 + 1e-12);
        }
        for (_, s) in pairs {
            prop_assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn aps_top_label_scores_its_own_mass(logits in logits_strategy()) {
        let probs = softmax_probs(&logits).unwrap();
        let cfg = NonconformityConfig::aps();
        let top = probs
            .iter()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(a.0)))
            .map(|(l, _)| *l)
            .unwrap();
        let s = nonconformity(&probs, top, &cfg).unwrap();
        prop_assert!((s - probs[&top]).abs() < 1e-12);
        // The lowest-ranked label accumulates the whole distribution.
        let bottom = probs
            .iter()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(a.0)))
            .map(|(l, _)| *l)
            .unwrap();
        let s = nonconformity(&probs, bottom, &cfg).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quantile_is_monotone_in_alpha(
        scores in prop::collection::vec(0.0f64..1.0, 1..200),
        a1 in 0.01f64..0.98,
        gap in 0.01f64..0.5,
    ) {
        let a2 = (a1 + gap).min(0.99);
        let kind = NonconformityConfig::lac();
        let q1 = calibrate_scores(&scores, a1, kind).unwrap().q_hat;
        let q2 = calibrate_scores(&scores, a2, kind).unwrap().q_hat;
        prop_assert!(q1 >= q2);
    }

    #[test]
    fn generated_labels_are_a_prefix_bijection(k in 2usize..10, seed in 0u64..500) {
        let scene = Scene::open_road(5.0, Goal::GoStraight);
        let set = generate_candidates(&scene, &GeneratorConfig { k, seed, ..Default::default() }).unwrap();
        prop_assert_eq!(set.candidates.len(), k);
        for (i, c) in set.candidates.iter().enumerate() {
            prop_assert_eq!(c.label, OptionLabel::from_index(i));
        }
    }
}
