//! Reconciliation of an aligned query graph into the reference graph.
//!
//! Each query object is classified against the reference as a matching
//! node (same object, refine geometry), a conflicting label (same place,
//! different class: replace), or a new node (insert). Edges observed in the
//! query then overwrite the reference edges between the corresponding nodes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::alignment::{validate_mapping, NodeMapping, Thresholds};
use crate::error::{Error, Result};
use crate::graph::{EntityNode, InstanceId, RelationEdge, SceneGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchKind {
    MatchingNode,
    ConflictingLabel,
    NewNode,
}

/// Classification of one query node.
///
/// For `NewNode`, `reference_id` is absent and `dist`/`iou` describe the
/// nearest reference node (infinite distance when the reference is empty).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchDecision {
    pub kind: MatchKind,
    pub query_id: InstanceId,
    pub reference_id: Option<InstanceId>,
    pub dist: f64,
    pub iou: f64,
}

fn classify_excluding(
    o: &EntityNode,
    g_r: &SceneGraph,
    th: &Thresholds,
    claimed: &BTreeSet<InstanceId>,
) -> MatchDecision {
    let mut candidates: Vec<(f64, InstanceId)> = g_r
        .nodes()
        .filter(|n| !claimed.contains(&n.id()))
        .map(|n| (o.centroid_distance(n), n.id()))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let nearest = candidates
        .first()
        .map(|&(d, id)| (d, o.bbox().iou(g_r.node(id).unwrap().bbox())));
    for &(dist, id) in candidates.iter().take_while(|(d, _)| *d < th.theta_dis) {
        let r = g_r.node(id).unwrap();
        let iou = o.bbox().iou(r.bbox());
        if iou > th.theta_bbox {
            let kind = if r.label() == o.label() {
                MatchKind::MatchingNode
            } else {
                MatchKind::ConflictingLabel
            };
            return MatchDecision {
                kind,
                query_id: o.id(),
                reference_id: Some(id),
                dist,
                iou,
            };
        }
    }
    let (dist, iou) = nearest.unwrap_or((f64::INFINITY, 0.0));
    MatchDecision {
        kind: MatchKind::NewNode,
        query_id: o.id(),
        reference_id: None,
        dist,
        iou,
    }
}

/// Classifies `o` against the reference graph. Candidates are visited by
/// ascending centroid distance (ties by id); the first one within
/// `theta_dis` whose IoU exceeds `theta_bbox` decides between a matching
/// node and a conflicting label. Otherwise the object is new.
pub fn classify_node(o: &EntityNode, g_r: &SceneGraph, th: &Thresholds) -> MatchDecision {
    classify_excluding(o, g_r, th, &BTreeSet::new())
}

/// Applies the update rules in place and returns one decision per query node.
pub(crate) fn apply_update(
    g_q: &SceneGraph,
    g_r: &mut SceneGraph,
    map: &NodeMapping,
    th: &Thresholds,
) -> Result<Vec<MatchDecision>> {
    let mut claimed = BTreeSet::new();
    let mut image: BTreeMap<InstanceId, InstanceId> = BTreeMap::new();
    let mut decisions = Vec::with_capacity(g_q.node_count());

    let mapped: Vec<&EntityNode> = g_q.nodes().filter(|n| map.get(n.id()).is_some()).collect();
    let unmapped: Vec<&EntityNode> = g_q.nodes().filter(|n| map.get(n.id()).is_none()).collect();

    for q in mapped.into_iter().chain(unmapped) {
        let aligned = map.get(q.id()).and_then(|r| {
            let rn = g_r.node(r)?;
            let dist = q.centroid_distance(rn);
            let iou = q.bbox().iou(rn.bbox());
            (!claimed.contains(&r) && dist < th.theta_dis && iou > th.theta_bbox && rn.label() == q.label()).then_some(
                MatchDecision {
                    kind: MatchKind::MatchingNode,
                    query_id: q.id(),
                    reference_id: Some(r),
                    dist,
                    iou,
                },
            )
        });
        let decision = aligned.unwrap_or_else(|| classify_excluding(q, g_r, th, &claimed));

        let target = match (decision.kind, decision.reference_id) {
            (MatchKind::MatchingNode, Some(r)) => {
                let node = g_r.node_mut(r).ok_or(Error::UnknownNode(r))?;
                let bbox = node.bbox().union(q.bbox());
                node.set_geometry(q.centroid(), bbox);
                node.set_ranking(q.label_ranking().clone());
                node.set_stddev(q.stddev());
                node.set_provenance(*q.provenance());
                r
            }
            (MatchKind::ConflictingLabel, Some(r)) => {
                let node = g_r.node_mut(r).ok_or(Error::UnknownNode(r))?;
                node.set_geometry(q.centroid(), *q.bbox());
                node.set_ranking(q.label_ranking().clone());
                node.set_stddev(q.stddev());
                node.set_provenance(*q.provenance());
                r
            }
            _ => {
                let id = if g_r.contains_node(q.id()) {
                    g_r.next_free_id()
                } else {
                    q.id()
                };
                let mut node = q.clone();
                node.set_id(id);
                g_r.insert_node(node)?;
                id
            }
        };
        claimed.insert(target);
        image.insert(q.id(), target);
        decisions.push(decision);
    }

    edge_reconcile(g_q, g_r, &image)?;
    Ok(decisions)
}

/// Reconciles `g_q` into a copy of `g_r` given an alignment mapping.
pub fn graph_update(
    g_q: &SceneGraph,
    g_r: &SceneGraph,
    map: &NodeMapping,
    th: &Thresholds,
) -> Result<(SceneGraph, Vec<MatchDecision>)> {
    th.validate()?;
    if !validate_mapping(map, g_q, g_r) {
        return Err(Error::Contract("graph_update received an invalid mapping".into()));
    }
    let mut out = g_r.clone();
    let decisions = apply_update(g_q, &mut out, map, th)?;
    Ok((out, decisions))
}

/// For every directed query pair `(s, o)` with both endpoints imaged, the
/// reference edges `image[s] -> image[o]` are replaced by the query's edges.
/// Reference edges between pairs the query holds no edge for are kept.
pub fn edge_reconcile(g_q: &SceneGraph, g_r: &mut SceneGraph, image: &BTreeMap<InstanceId, InstanceId>) -> Result<()> {
    let mut by_pair: BTreeMap<(InstanceId, InstanceId), Vec<&RelationEdge>> = BTreeMap::new();
    for e in g_q.edges() {
        if let (Some(&s), Some(&o)) = (image.get(&e.subject()), image.get(&e.object())) {
            by_pair.entry((s, o)).or_default().push(e);
        }
    }
    for ((s, o), edges) in by_pair {
        g_r.remove_edges_between(s, o);
        for e in edges {
            g_r.insert_edge(e.reattached(s, o)?)?;
        }
    }
    Ok(())
}
