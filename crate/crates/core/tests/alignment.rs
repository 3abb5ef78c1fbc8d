mod support;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenefuse::alignment::{
    best_mapping_for_anchor, graph_search, scene_graph_update, validate_mapping, Branch, NodeMapping, Thresholds,
};
use scenefuse::update::{graph_update, MatchKind};
use support::*;

fn pair(seed: u64, nq: usize, nr: usize) -> (scenefuse::graph::SceneGraph, scenefuse::graph::SceneGraph) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_graph(&mut rng, 0, nq, 3, 0.4);
    let r = random_graph(&mut rng, 100, nr, 3, 0.4);
    (q, r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn search_output_is_valid_and_bounded(seed in any::<u64>(), nq in 1usize..=8, nr in 1usize..=8) {
        let (q, r) = pair(seed, nq, nr);
        let bound = max_connected_common_subgraph(&q, &r);
        for anchor in q.node_ids() {
            let label = q.node(anchor).unwrap().label();
            for image in r.nodes().filter(|n| n.label() == label).map(|n| n.id()) {
                let seeded = NodeMapping::seeded(anchor, image);
                let out = graph_search(anchor, &q, &r, seeded.clone()).unwrap();
                prop_assert!(validate_mapping(&out, &q, &r));
                prop_assert!(out.len() <= bound);
                for (a, b) in seeded.pairs() {
                    prop_assert_eq!(out.get(a), Some(b));
                }
            }
            if let Some(best) = best_mapping_for_anchor(anchor, &q, &r).unwrap() {
                prop_assert!(validate_mapping(&best, &q, &r));
                prop_assert!(best.len() <= bound);
            }
        }
    }

    #[test]
    fn update_is_total_and_conservative(seed in any::<u64>(), nq in 1usize..=8, nr in 0usize..=8, theta_len in 1usize..4) {
        let (q, r) = pair(seed, nq, nr);
        let th = Thresholds { theta_len, ..Thresholds::default() };
        let (out, report) = scene_graph_update(&q, &r, &th, 5, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        out.check_invariants().unwrap();
        prop_assert!(out.node_count() >= r.node_count());
        prop_assert!(out.node_count() <= r.node_count() + q.node_count());
        match report.branch {
            Branch::Merged => {
                prop_assert!(report.map_size > theta_len);
                prop_assert_eq!(report.decisions.len(), q.node_count());
                let mut ids: Vec<_> = report.decisions.iter().map(|d| d.query_id).collect();
                ids.sort();
                prop_assert_eq!(ids, q.node_ids().collect::<Vec<_>>());
                for d in &report.decisions {
                    let qn = q.node(d.query_id).unwrap();
                    match d.kind {
                        MatchKind::MatchingNode => {
                            let before = r.node(d.reference_id.unwrap()).unwrap();
                            let after = out.node(d.reference_id.unwrap()).unwrap();
                            prop_assert!(after.bbox().contains(before.bbox()));
                            prop_assert!(after.bbox().contains(qn.bbox()));
                        }
                        MatchKind::ConflictingLabel => {
                            prop_assert_eq!(out.node(d.reference_id.unwrap()).unwrap().label(), qn.label());
                        }
                        MatchKind::NewNode => prop_assert!(d.reference_id.is_none()),
                    }
                }
            }
            Branch::Appended => {
                prop_assert!(report.map_size <= theta_len);
                prop_assert_eq!(out.node_count(), r.node_count() + q.node_count());
                prop_assert_eq!(out.edge_count(), r.edge_count() + q.edge_count());
            }
        }
        let (again, report2) = scene_graph_update(&q, &r, &th, 5, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(&again, &out);
        prop_assert_eq!(report2.decisions, report.decisions);
    }
}

#[test]
fn identical_connected_graph_merges_in_place() {
    let labels = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];
    let edges: Vec<(usize, usize)> = (0..9).map(|i| (i, i + 1)).chain([(0, 5), (2, 7)]).collect();
    let r = graph(0, &labels, &edges);
    let q = graph(0, &labels, &edges);
    let (out, report) =
        scene_graph_update(&q, &r, &Thresholds::default(), 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(report.branch, Branch::Merged);
    assert_eq!(out.node_count(), r.node_count());
    assert_eq!(out.edge_count(), r.edge_count());
    assert!(report.decisions.iter().all(|d| d.kind == MatchKind::MatchingNode));
}

#[test]
fn two_shared_nodes_do_not_merge() {
    let r = graph(0, &["a", "b", "c", "d"], &[(0, 1), (1, 2), (2, 3)]);
    let q = graph(10, &["a", "b", "x", "y"], &[(0, 1), (1, 2), (2, 3)]);
    assert_eq!(max_connected_common_subgraph(&q, &r), 2);
    let (out, report) =
        scene_graph_update(&q, &r, &Thresholds::default(), 5, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_eq!(report.branch, Branch::Appended);
    assert_eq!(report.map_size, 2);
    assert_eq!(out.node_count(), 8);
}

#[test]
fn graph_update_twice_is_idempotent_in_the_typical_case() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(4..8);
        let r = random_graph(&mut rng, 0, n, 4, 0.5);
        let q = r.clone();
        let anchor = q.node_ids().next().unwrap();
        let map = best_mapping_for_anchor(anchor, &q, &r).unwrap().unwrap();
        let (once, _) = graph_update(&q, &r, &map, &Thresholds::default()).unwrap();
        let (twice, _) = graph_update(&q, &once, &map, &Thresholds::default()).unwrap();
        assert_eq!(once, twice);
    }
}

#[test]
fn empty_reference_gives_the_query_back() {
    let q = graph(0, &["a", "b"], &[(0, 1)]);
    let (out, report) = scene_graph_update(
        &q,
        &scenefuse::graph::SceneGraph::default(),
        &Thresholds::default(),
        5,
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    assert_eq!(report.branch, Branch::Appended);
    assert_eq!(out, q);
}
