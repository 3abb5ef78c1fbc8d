mod support;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenefuse::geometry::Aabb;
use scenefuse::graph::{EntityNode, InstanceId, RelationEdge, SceneGraph};
use scenefuse::metrics::*;
use support::*;

const LABELS: [&str; 4] = ["chair", "table", "lamp", "sofa"];
const PREDS: [&str; 3] = ["near", "on", "left"];

/// Ground truth with `n` spaced instances, and a prediction that jitters
/// them, drops some, relabels some (keeping the truth second in the
/// ranking) and adds a few spurious ones.
fn scene_pair(seed: u64, n: usize) -> (SceneGraph, SceneGraph) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gt = SceneGraph::default();
    let mut pred = SceneGraph::default();
    for i in 0..n as u64 {
        let label = LABELS[rng.random_range(0..LABELS.len())];
        let x = 2.0 * i as f64;
        gt.insert_node(with_gt(node_at(i, label, x), i, 0)).unwrap();
        if rng.random_bool(0.15) {
            continue;
        }
        let j = [0, 1, 2].map(|_| rng.random_range(-0.12..0.12));
        let b = Aabb::new([x + j[0], j[1], j[2]], [x + 0.5 + j[0], 0.5 + j[1], 0.5 + j[2]]).unwrap();
        let ranking = if rng.random_bool(0.3) {
            let other = LABELS.iter().find(|l| **l != label).unwrap();
            vec![((*other).to_owned(), 0.6), (label.to_owned(), 0.4)]
        } else {
            vec![(label.to_owned(), 1.0)]
        };
        let node = EntityNode::with_ranking(InstanceId(i), ranking, b.center(), b).unwrap();
        pred.insert_node(with_gt(node, i, 1)).unwrap();
    }
    for k in 0..rng.random_range(0..3u64) {
        pred.insert_node(node_at(100 + k, "sofa", -5.0 - 2.0 * k as f64))
            .unwrap();
    }
    for i in 0..n.saturating_sub(1) as u64 {
        let p = PREDS[rng.random_range(0..PREDS.len())];
        gt.insert_edge(RelationEdge::new(InstanceId(i), p, InstanceId(i + 1)).unwrap())
            .unwrap();
        if pred.contains_node(InstanceId(i)) && pred.contains_node(InstanceId(i + 1)) && rng.random_bool(0.8) {
            let shown = if rng.random_bool(0.3) {
                PREDS[rng.random_range(0..PREDS.len())]
            } else {
                p
            };
            let ranking = if shown == p {
                vec![(p.to_owned(), 1.0)]
            } else {
                vec![(shown.to_owned(), 0.7), (p.to_owned(), 0.3)]
            };
            pred.insert_edge(RelationEdge::with_ranking(InstanceId(i), ranking, InstanceId(i + 1)).unwrap())
                .unwrap();
        }
    }
    (pred, gt)
}

fn check_identities(r: &EvalResult, n_gt: usize, n_pred: usize) -> Result<(), TestCaseError> {
    prop_assert_eq!(r.tp + r.fn_, n_gt);
    prop_assert_eq!(r.tp + r.fp, n_pred);
    prop_assert!((0.0..=1.0).contains(&r.recall) && (0.0..=1.0).contains(&r.precision));
    prop_assert_eq!(r.f1, f1(r.recall, r.precision));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn greedy_matching_reaches_the_optimal_assignment(seed in any::<u64>(), n in 1usize..=10) {
        let (pred, gt) = scene_pair(seed, n);
        let spec = MatchSpec::default();
        let m = match_instances(&pred, &gt, &spec);
        let best = optimal_assignment_iou(&pred, &gt, &spec.gate.unwrap());
        prop_assert!((total_iou(&pred, &gt, &m) - best).abs() <= 1e-9);
    }

    #[test]
    fn matching_is_one_to_one_and_gated(seed in any::<u64>(), n in 1usize..=10) {
        let (pred, gt) = scene_pair(seed, n);
        let gate = SpatialGate::default();
        let m = match_instances(&pred, &gt, &MatchSpec { k: 1, gate: Some(gate) });
        let images: BTreeSet<_> = m.values().collect();
        prop_assert_eq!(images.len(), m.len());
        for (p, g) in &m {
            let (p, g) = (pred.node(*p).unwrap(), gt.node(*g).unwrap());
            prop_assert!(p.bbox().iou(g.bbox()) >= gate.iou_min);
            prop_assert!(scenefuse::geometry::distance(p.centroid(), g.centroid()) <= gate.dist_max);
        }
        let u = match_instances(&pred, &gt, &MatchSpec::ungated(1));
        prop_assert_eq!(u.values().collect::<BTreeSet<_>>().len(), u.len());
    }

    #[test]
    fn counts_are_consistent_and_recall_grows_with_k(seed in any::<u64>(), n in 1usize..=10) {
        let (pred, gt) = scene_pair(seed, n);
        let mut last = None::<TaskScores>;
        for k in 1..=3 {
            for gate in [Some(SpatialGate::default()), None] {
                let s = evaluate(&pred, &gt, &MatchSpec { k, gate });
                check_identities(&s.object, gt.node_count(), pred.node_count())?;
                check_identities(&s.predicate, gt.edge_count(), pred.edge_count())?;
                check_identities(&s.triplet, gt.edge_count(), pred.edge_count())?;
                prop_assert!(s.triplet.tp <= s.predicate.tp);
            }
            let s = evaluate(&pred, &gt, &MatchSpec { k, gate: None });
            if let Some(prev) = last {
                prop_assert!(s.object.recall >= prev.object.recall);
                prop_assert!(s.predicate.recall >= prev.predicate.recall);
                prop_assert!(s.triplet.recall >= prev.triplet.recall);
            }
            last = Some(s);
        }
    }

    #[test]
    fn perfect_prediction_scores_one(seed in any::<u64>(), n in 1usize..=10) {
        let (_, gt) = scene_pair(seed, n);
        for k in 1..=2 {
            let s = evaluate(&gt, &gt, &MatchSpec::ungated(k));
            for r in [s.object, s.predicate, s.triplet] {
                prop_assert_eq!(r.f1, 1.0);
            }
        }
    }

    #[test]
    fn swapping_roles_swaps_recall_and_precision(seed in any::<u64>(), n in 1usize..=10) {
        // single-entry rankings keep label checks symmetric
        let (pred, gt) = scene_pair(seed, n);
        let mut flat = SceneGraph::default();
        for p in pred.nodes() {
            let node = EntityNode::new(p.id(), p.label(), p.centroid(), *p.bbox()).unwrap().with_provenance(*p.provenance());
            flat.insert_node(node).unwrap();
        }
        let spec = MatchSpec::default();
        let forward = eval_objects(&flat, &gt, &spec);
        let backward = eval_objects(&gt, &flat, &spec);
        prop_assert_eq!(forward.recall, backward.precision);
        prop_assert_eq!(forward.precision, backward.recall);
    }
}

#[test]
fn traffic_sums_match_entries() {
    let mut log = TrafficLog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in 0..40 {
        log.record(TrafficEntry {
            sender: scenefuse::graph::AgentId(rng.random_range(1..5)),
            receiver: None,
            bytes: rng.random_range(0..10_000),
            t,
        });
    }
    let per_agent: u64 = log.per_agent_bytes().values().sum();
    assert_eq!(per_agent, log.total_bytes());
    let s = traffic_summary(&log, 4);
    assert_eq!(s.total_mb, log.total_bytes() as f64 / 1e6);
    assert_eq!(s.per_agent_mb, s.total_mb / 4.0);
}

#[test]
fn timing_is_a_cumulative_sum() {
    use scenefuse::alignment::{AlignmentReport, Branch};
    let reports: Vec<AlignmentReport> = (1..=6)
        .map(|i| AlignmentReport {
            anchors_tried: 1,
            map_size: 0,
            branch: Branch::Appended,
            align_seconds: 0.125 * i as f64,
            remapped: vec![],
            decisions: vec![],
        })
        .collect();
    let mut running = 0.0;
    let mut last = 0.0;
    for n in 0..=reports.len() {
        let t = timing_summary(&reports[..n], std::time::Duration::ZERO).total_align_seconds;
        if n > 0 {
            running += reports[n - 1].align_seconds;
        }
        assert_eq!(t, running);
        assert!(t >= last);
        last = t;
    }
}
