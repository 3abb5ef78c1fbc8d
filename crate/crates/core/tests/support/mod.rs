//! Independent oracles and fixture builders shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use scenefuse::geometry::Aabb;
use scenefuse::graph::{AgentId, EntityNode, InstanceId, Provenance, RelationEdge, RoomId, SceneGraph};
use scenefuse::metrics::SpatialGate;

pub fn id(n: u64) -> InstanceId {
    InstanceId(n)
}

/// Half-meter cube at `x` on the x axis.
pub fn node_at(n: u64, label: &str, x: f64) -> EntityNode {
    let b = Aabb::new([x, 0.0, 0.0], [x + 0.5, 0.5, 0.5]).unwrap();
    EntityNode::new(InstanceId(n), label, b.center(), b).unwrap()
}

pub fn boxed(n: u64, label: &str, min: [f64; 3], max: [f64; 3]) -> EntityNode {
    let b = Aabb::new(min, max).unwrap();
    EntityNode::new(InstanceId(n), label, b.center(), b).unwrap()
}

pub fn with_gt(node: EntityNode, gt: u64, t: u64) -> EntityNode {
    node.with_provenance(Provenance {
        agent: AgentId(1),
        room: RoomId(0),
        t,
        gt: Some(InstanceId(gt)),
    })
}

pub fn edge(s: u64, p: &str, o: u64) -> RelationEdge {
    RelationEdge::new(InstanceId(s), p, InstanceId(o)).unwrap()
}

/// Graph with nodes `labels[i]` at id `base + i`, 2 m apart, plus `edges`
/// given as index pairs.
pub fn graph(base: u64, labels: &[&str], edges: &[(usize, usize)]) -> SceneGraph {
    let mut g = SceneGraph::new("world");
    for (i, l) in labels.iter().enumerate() {
        g.insert_node(node_at(base + i as u64, l, 2.0 * i as f64)).unwrap();
    }
    for &(a, b) in edges {
        g.insert_edge(edge(base + a as u64, "near", base + b as u64)).unwrap();
    }
    g
}

/// Random graph: `n` nodes with labels drawn from the first `n_labels`
/// letters, each unordered pair joined with probability `p`.
pub fn random_graph<R: Rng>(rng: &mut R, base: u64, n: usize, n_labels: usize, p: f64) -> SceneGraph {
    const LETTERS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
    let labels: Vec<&str> = (0..n).map(|_| LETTERS[rng.random_range(0..n_labels)]).collect();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                pairs.push(if rng.random_bool(0.5) { (i, j) } else { (j, i) });
            }
        }
    }
    graph(base, &labels, &pairs)
}

/// Largest injective, label-consistent mapping whose mapped query nodes
/// are connected through query edges whose images are adjacent in the
/// reference graph. Exhaustive search over pair sets (up to 8x8 nodes).
pub fn max_connected_common_subgraph(g_q: &SceneGraph, g_r: &SceneGraph) -> usize {
    let q: Vec<&EntityNode> = g_q.nodes().collect();
    let r: Vec<&EntityNode> = g_r.nodes().collect();
    assert!(q.len() * r.len() <= 64, "oracle is limited to 64 candidate pairs");
    let nr = r.len();
    let adj_q = |a: usize, b: usize| g_q.are_adjacent(q[a].id(), q[b].id());
    let adj_r = |a: usize, b: usize| g_r.are_adjacent(r[a].id(), r[b].id());
    let bit = |i: usize, j: usize| 1u64 << (i * nr + j);

    let mut best = 0;
    let mut seen: HashSet<u64> = HashSet::new();
    let mut stack: Vec<u64> = Vec::new();
    for i in 0..q.len() {
        for j in 0..nr {
            if q[i].label() == r[j].label() {
                stack.push(bit(i, j));
            }
        }
    }
    while let Some(state) = stack.pop() {
        if !seen.insert(state) {
            continue;
        }
        let pairs: Vec<(usize, usize)> = (0..q.len() * nr)
            .filter(|b| state & (1u64 << b) != 0)
            .map(|b| (b / nr, b % nr))
            .collect();
        best = best.max(pairs.len());
        let used_q: Vec<bool> = (0..q.len()).map(|i| pairs.iter().any(|p| p.0 == i)).collect();
        let used_r: Vec<bool> = (0..nr).map(|j| pairs.iter().any(|p| p.1 == j)).collect();
        for &(a, ia) in &pairs {
            for u in 0..q.len() {
                if used_q[u] || !adj_q(a, u) {
                    continue;
                }
                for v in 0..nr {
                    if !used_r[v] && adj_r(ia, v) && q[u].label() == r[v].label() {
                        let next = state | bit(u, v);
                        if !seen.contains(&next) {
                            stack.push(next);
                        }
                    }
                }
            }
        }
    }
    best
}

/// Maximum total IoU over one-to-one assignments of gate-passing pairs,
/// by dynamic programming over subsets of ground-truth nodes.
pub fn optimal_assignment_iou(pred: &SceneGraph, gt: &SceneGraph, gate: &SpatialGate) -> f64 {
    let p: Vec<&EntityNode> = pred.nodes().collect();
    let g: Vec<&EntityNode> = gt.nodes().collect();
    assert!(g.len() <= 16);
    let weight = |i: usize, j: usize| {
        let d = scenefuse::geometry::distance(p[i].centroid(), g[j].centroid());
        let iou = p[i].bbox().iou(g[j].bbox());
        (d <= gate.dist_max && iou >= gate.iou_min).then_some(iou)
    };
    let full = 1usize << g.len();
    let mut dp = vec![f64::NEG_INFINITY; full];
    dp[0] = 0.0;
    for i in 0..p.len() {
        let mut next = dp.clone();
        for mask in 0..full {
            if dp[mask] == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..g.len() {
                if mask & (1 << j) == 0 {
                    if let Some(w) = weight(i, j) {
                        let m = mask | (1 << j);
                        next[m] = next[m].max(dp[mask] + w);
                    }
                }
            }
        }
        dp = next;
    }
    dp.into_iter().fold(0.0, f64::max)
}

pub fn total_iou(pred: &SceneGraph, gt: &SceneGraph, m: &BTreeMap<InstanceId, InstanceId>) -> f64 {
    m.iter()
        .map(|(p, g)| pred.node(*p).unwrap().bbox().iou(gt.node(*g).unwrap().bbox()))
        .sum()
}

/// Edges as (subject gt, predicate, object gt) using provenance ids.
pub fn edge_multiset_by_gt(g: &SceneGraph) -> Vec<(u64, String, u64)> {
    let gt_of = |n: InstanceId| g.node(n).and_then(|x| x.provenance().gt).unwrap_or(n).0;
    let mut v: Vec<_> = g
        .edges()
        .map(|e| (gt_of(e.subject()), e.predicate().to_owned(), gt_of(e.object())))
        .collect();
    v.sort();
    v
}

/// Checks that `merged` reproduces `gt`: one node per instance with the
/// same label and a centroid within `tol`, and the same edge multiset.
pub fn equals_ground_truth(merged: &SceneGraph, gt: &SceneGraph, tol: f64) -> Result<(), String> {
    if merged.node_count() != gt.node_count() {
        return Err(format!("{} nodes, expected {}", merged.node_count(), gt.node_count()));
    }
    let mut seen = HashSet::new();
    for n in merged.nodes() {
        let g = n
            .provenance()
            .gt
            .ok_or_else(|| format!("{} has no ground-truth id", n.id()))?;
        if !seen.insert(g) {
            return Err(format!("instance {g} represented twice"));
        }
        let t = gt.node(g).ok_or_else(|| format!("{g} is not in the ground truth"))?;
        if t.label() != n.label() {
            return Err(format!("{g}: label {} vs {}", n.label(), t.label()));
        }
        let d = scenefuse::geometry::distance(t.centroid(), n.centroid());
        if d > tol {
            return Err(format!("{g}: centroid off by {d}"));
        }
    }
    let mut truth: Vec<_> = gt
        .edges()
        .map(|e| (e.subject().0, e.predicate().to_owned(), e.object().0))
        .collect();
    truth.sort();
    if edge_multiset_by_gt(merged) != truth {
        return Err("edge multisets differ".into());
    }
    Ok(())
}
