//! Label-seeded subgraph alignment between a query graph and the reference
//! graph, and the threshold-gated merge decision built on top of it.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{InstanceId, SceneGraph};
use crate::update::{apply_update, MatchDecision};

/// Query graphs with at most this many nodes use every node as an anchor.
pub const SMALL_GRAPH_NODES: usize = 6;

pub const DEFAULT_MAX_ANCHORS: usize = 5;

/// Merge thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// A mapping must contain strictly more nodes than this to merge.
    pub theta_len: usize,
    /// Centroid distance gate in meters.
    pub theta_dis: f64,
    /// Bounding-box IoU gate.
    pub theta_bbox: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            theta_len: 3,
            theta_dis: 1.5,
            theta_bbox: 0.4,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if self.theta_len < 1 {
            return Err(Error::Config("theta_len must be >= 1".into()));
        }
        if !(self.theta_dis > 0.0 && self.theta_dis.is_finite()) {
            return Err(Error::Config("theta_dis must be > 0".into()));
        }
        if !(self.theta_bbox > 0.0 && self.theta_bbox < 1.0) {
            return Err(Error::Config("theta_bbox must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Partial injective map from query node ids to reference node ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeMapping {
    anchor: Option<InstanceId>,
    pairs: BTreeMap<InstanceId, InstanceId>,
    images: BTreeSet<InstanceId>,
    visit: BTreeSet<InstanceId>,
}

impl NodeMapping {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Mapping holding only `anchor -> image`.
    pub fn seeded(anchor: InstanceId, image: InstanceId) -> Self {
        let mut m = Self {
            anchor: Some(anchor),
            ..Self::default()
        };
        m.pairs.insert(anchor, image);
        m.images.insert(image);
        m
    }

    pub fn anchor(&self) -> Option<InstanceId> {
        self.anchor
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, q: InstanceId) -> Option<InstanceId> {
        self.pairs.get(&q).copied()
    }

    pub fn is_image(&self, r: InstanceId) -> bool {
        self.images.contains(&r)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (InstanceId, InstanceId)> + '_ {
        self.pairs.iter().map(|(q, r)| (*q, *r))
    }

    pub fn visited(&self) -> &BTreeSet<InstanceId> {
        &self.visit
    }

    /// Adds `q -> r` without any checks. Intended for building fixtures,
    /// including invalid ones; run [`validate_mapping`] before trusting it.
    pub fn insert_unchecked(&mut self, q: InstanceId, r: InstanceId) {
        if self.anchor.is_none() {
            self.anchor = Some(q);
        }
        self.pairs.insert(q, r);
        self.images.insert(r);
    }

    fn try_insert(&mut self, q: InstanceId, r: InstanceId) -> bool {
        if self.pairs.contains_key(&q) || self.images.contains(&r) {
            return false;
        }
        self.pairs.insert(q, r);
        self.images.insert(r);
        true
    }
}

/// Picks the anchors that seed alignment. Graphs with more than
/// [`SMALL_GRAPH_NODES`] nodes get a uniform sample without replacement of
/// `min(max_anchors, n)` ids; smaller graphs use all ids in shuffled order.
pub fn select_anchors<R: Rng + ?Sized>(g_q: &SceneGraph, max_anchors: usize, rng: &mut R) -> Result<Vec<InstanceId>> {
    if g_q.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let ids: Vec<InstanceId> = g_q.node_ids().collect();
    if ids.len() <= SMALL_GRAPH_NODES {
        let mut all = ids;
        all.shuffle(rng);
        return Ok(all);
    }
    let amount = max_anchors.clamp(1, ids.len());
    Ok(index::sample(rng, ids.len(), amount)
        .into_iter()
        .map(|i| ids[i])
        .collect())
}

/// Depth-first expansion of `map` from the already-mapped query node `q`.
///
/// Each unvisited, unmapped query neighbour `u` of the current node is
/// mapped to the first reference neighbour (ascending id) of the current
/// node's image that carries the same label and is not yet an image, then
/// the search descends into `u`. Existing pairs are never changed.
pub fn graph_search(q: InstanceId, g_q: &SceneGraph, g_r: &SceneGraph, mut map: NodeMapping) -> Result<NodeMapping> {
    if map.get(q).is_none() {
        return Err(Error::Contract(format!("graph_search started from unmapped node {q}")));
    }
    if !g_q.contains_node(q) {
        return Err(Error::UnknownNode(q));
    }
    struct Frame {
        node: InstanceId,
        neighbors: Vec<InstanceId>,
        next: usize,
    }
    map.visit.insert(q);
    let mut stack = vec![Frame {
        node: q,
        neighbors: g_q.neighbors(q)?,
        next: 0,
    }];
    while let Some(frame) = stack.last_mut() {
        let Some(&u) = frame.neighbors.get(frame.next) else {
            stack.pop();
            continue;
        };
        frame.next += 1;
        if map.visit.contains(&u) || map.pairs.contains_key(&u) {
            continue;
        }
        let image = map.pairs[&frame.node];
        let label = g_q.node(u).expect("neighbor exists").label();
        let candidate = g_r
            .neighbor_iter(image)
            .find(|v| !map.images.contains(v) && g_r.node(*v).is_some_and(|n| n.label() == label));
        if let Some(v) = candidate {
            map.try_insert(u, v);
            map.visit.insert(u);
            stack.push(Frame {
                node: u,
                neighbors: g_q.neighbors(u)?,
                next: 0,
            });
        }
    }
    Ok(map)
}

/// True iff the mapping is injective, label-consistent, refers to existing
/// nodes, and every mapped node is reachable from the anchor through query
/// edges whose endpoints' images are adjacent in the reference graph.
pub fn validate_mapping(map: &NodeMapping, g_q: &SceneGraph, g_r: &SceneGraph) -> bool {
    if map.pairs.is_empty() {
        return true;
    }
    let mut images = BTreeSet::new();
    for (q, r) in map.pairs() {
        let (Some(qn), Some(rn)) = (g_q.node(q), g_r.node(r)) else {
            return false;
        };
        if qn.label() != rn.label() || !images.insert(r) {
            return false;
        }
    }
    let Some(anchor) = map.anchor.filter(|a| map.pairs.contains_key(a)) else {
        return false;
    };
    let mut reached = BTreeSet::from([anchor]);
    let mut frontier = vec![anchor];
    while let Some(p) = frontier.pop() {
        let image_p = map.pairs[&p];
        for u in g_q.neighbor_iter(p) {
            if let Some(image_u) = map.get(u) {
                if !reached.contains(&u) && g_r.are_adjacent(image_p, image_u) {
                    reached.insert(u);
                    frontier.push(u);
                }
            }
        }
    }
    reached.len() == map.pairs.len()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Merged,
    Appended,
}

/// Outcome of one [`scene_graph_update`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub anchors_tried: usize,
    pub map_size: usize,
    pub branch: Branch,
    pub align_seconds: f64,
    /// Query ids renamed on insertion because the reference already used them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub remapped: Vec<(InstanceId, InstanceId)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decisions: Vec<MatchDecision>,
}

/// Best mapping for one anchor over every same-label reference image; ties
/// keep the smallest reference id. `None` when no reference node shares the
/// anchor's label.
pub fn best_mapping_for_anchor(anchor: InstanceId, g_q: &SceneGraph, g_r: &SceneGraph) -> Result<Option<NodeMapping>> {
    let label = g_q.node(anchor).ok_or(Error::UnknownNode(anchor))?.label();
    let mut best: Option<NodeMapping> = None;
    for r in g_r.nodes().filter(|n| n.label() == label) {
        let m = graph_search(anchor, g_q, g_r, NodeMapping::seeded(anchor, r.id()))?;
        if best.as_ref().is_none_or(|b| m.len() > b.len()) {
            best = Some(m);
        }
    }
    Ok(best)
}

/// Inserts every node and edge of `g_q` into `g_r`. Ids already taken in
/// `g_r` are replaced by fresh ones; the renames are returned.
pub fn append_graph(g_q: &SceneGraph, g_r: &mut SceneGraph) -> Result<Vec<(InstanceId, InstanceId)>> {
    let mut renames = BTreeMap::new();
    let mut remapped = Vec::new();
    for node in g_q.nodes() {
        let mut node = node.clone();
        let id = if g_r.contains_node(node.id()) {
            let fresh = g_r.next_free_id();
            remapped.push((node.id(), fresh));
            fresh
        } else {
            node.id()
        };
        renames.insert(node.id(), id);
        node.set_id(id);
        g_r.insert_node(node)?;
    }
    for edge in g_q.edges() {
        let e = edge.reattached(renames[&edge.subject()], renames[&edge.object()])?;
        g_r.insert_edge(e)?;
    }
    Ok(remapped)
}

/// Aligns `g_q` against `g_r` and either merges it through the graph-update
/// rules or appends it verbatim. Takes ownership of the reference graph.
///
/// Anchors are tried in [`select_anchors`] order; the first anchor whose
/// best mapping has more than `theta_len` nodes triggers the merge.
pub fn merge_into<R: Rng + ?Sized>(
    g_q: &SceneGraph,
    mut g_r: SceneGraph,
    th: &Thresholds,
    max_anchors: usize,
    rng: &mut R,
) -> Result<(SceneGraph, AlignmentReport)> {
    let start = Instant::now();
    th.validate()?;
    g_q.check_invariants()?;
    let anchors = select_anchors(g_q, max_anchors, rng)?;
    let mut tried = 0;
    let mut largest = 0;
    if !g_r.is_empty() {
        for anchor in anchors {
            tried += 1;
            let Some(best) = best_mapping_for_anchor(anchor, g_q, &g_r)? else {
                continue;
            };
            largest = largest.max(best.len());
            if best.len() > th.theta_len {
                let decisions = apply_update(g_q, &mut g_r, &best, th)?;
                let report = AlignmentReport {
                    anchors_tried: tried,
                    map_size: best.len(),
                    branch: Branch::Merged,
                    align_seconds: start.elapsed().as_secs_f64(),
                    remapped: Vec::new(),
                    decisions,
                };
                return Ok((g_r, report));
            }
        }
    }
    let remapped = append_graph(g_q, &mut g_r)?;
    let report = AlignmentReport {
        anchors_tried: tried,
        map_size: largest,
        branch: Branch::Appended,
        align_seconds: start.elapsed().as_secs_f64(),
        remapped,
        decisions: Vec::new(),
    };
    Ok((g_r, report))
}

/// Borrowing form of [`merge_into`]: `g_r` is left untouched and the merged
/// graph is returned as a new value.
pub fn scene_graph_update<R: Rng + ?Sized>(
    g_q: &SceneGraph,
    g_r: &SceneGraph,
    th: &Thresholds,
    max_anchors: usize,
    rng: &mut R,
) -> Result<(SceneGraph, AlignmentReport)> {
    merge_into(g_q, g_r.clone(), th, max_anchors, rng)
}
