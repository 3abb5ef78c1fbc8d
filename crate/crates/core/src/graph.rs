//! Semantic scene graph data model.
//!
//! A [`SceneGraph`] holds object instances ([`EntityNode`]) and directed
//! predicates between them ([`RelationEdge`]). Every mutation goes through
//! methods that keep referential integrity: no dangling edges, unique node
//! ids, and at most one edge per `(subject, predicate, object)` triple.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, Aabb, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub u64);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoomId(pub u32);

impl fmt::Display for RoomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "room-{}", self.0)
    }
}

/// Agent identifier. Agent 0 denotes ground-truth annotation; simulated
/// agents are numbered from 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl AgentId {
    pub const ANNOTATION: AgentId = AgentId(0);
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent-{}", self.0)
    }
}

/// Where an observation came from. `gt` links a simulated observation back
/// to the ground-truth instance it was generated from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub agent: AgentId,
    pub room: RoomId,
    pub t: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<InstanceId>,
}

/// Ranked class hypotheses, best first.
pub type Ranking = Vec<(String, f64)>;

fn check_ranking(ranking: &Ranking, what: &str) -> Result<()> {
    if ranking.is_empty() {
        return Err(Error::InvalidNode(format!("{what} ranking is empty")));
    }
    for (name, score) in ranking {
        if name.is_empty() || !score.is_finite() {
            return Err(Error::InvalidNode(format!(
                "{what} ranking entry ({name:?}, {score}) is invalid"
            )));
        }
    }
    if ranking.windows(2).any(|w| w[1].1 > w[0].1) {
        return Err(Error::InvalidNode(format!(
            "{what} ranking scores must be non-increasing"
        )));
    }
    Ok(())
}

/// One object instance.
#[derive(Clone, Debug, PartialEq)]
pub struct EntityNode {
    id: InstanceId,
    ranking: Ranking,
    centroid: Vec3,
    stddev: f64,
    bbox: Aabb,
    provenance: Provenance,
}

impl EntityNode {
    /// Node whose ranking is the single entry `(label, 1.0)`.
    pub fn new(id: InstanceId, label: impl Into<String>, centroid: Vec3, bbox: Aabb) -> Result<Self> {
        Self::with_ranking(id, vec![(label.into(), 1.0)], centroid, bbox)
    }

    pub fn with_ranking(id: InstanceId, ranking: Ranking, centroid: Vec3, bbox: Aabb) -> Result<Self> {
        check_ranking(&ranking, "label")?;
        if !bbox.contains_point(centroid) {
            return Err(Error::InvalidNode(format!(
                "centroid {centroid:?} of {id} lies outside its bounding box"
            )));
        }
        Ok(Self {
            id,
            ranking,
            centroid,
            stddev: 0.0,
            bbox,
            provenance: Provenance::default(),
        })
    }

    pub fn with_stddev(mut self, stddev: f64) -> Result<Self> {
        if !(stddev >= 0.0 && stddev.is_finite()) {
            return Err(Error::InvalidNode(format!("stddev {stddev} of {} is invalid", self.id)));
        }
        self.stddev = stddev;
        Ok(self)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn id(&self) -> InstanceId {
        self.id
    }

    pub fn label(&self) -> &str {
        &self.ranking[0].0
    }

    pub fn label_ranking(&self) -> &Ranking {
        &self.ranking
    }

    /// True if `label` is among the first `k` ranked hypotheses.
    pub fn label_in_top_k(&self, label: &str, k: usize) -> bool {
        self.ranking.iter().take(k).any(|(l, _)| l == label)
    }

    pub fn centroid(&self) -> Vec3 {
        self.centroid
    }

    pub fn stddev(&self) -> f64 {
        self.stddev
    }

    pub fn bbox(&self) -> &Aabb {
        &self.bbox
    }

    pub fn volume(&self) -> f64 {
        self.bbox.volume()
    }

    pub fn max_length(&self) -> f64 {
        self.bbox.max_length()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn centroid_distance(&self, other: &EntityNode) -> f64 {
        distance(self.centroid, other.centroid)
    }

    pub(crate) fn set_id(&mut self, id: InstanceId) {
        self.id = id;
    }

    /// Replaces geometry; the centroid is clamped into the new box.
    pub(crate) fn set_geometry(&mut self, centroid: Vec3, bbox: Aabb) {
        self.centroid = bbox.clamp_point(centroid);
        self.bbox = bbox;
    }

    pub(crate) fn set_ranking(&mut self, ranking: Ranking) {
        debug_assert!(check_ranking(&ranking, "label").is_ok());
        self.ranking = ranking;
    }

    pub(crate) fn set_stddev(&mut self, stddev: f64) {
        self.stddev = stddev;
    }

    pub(crate) fn set_provenance(&mut self, provenance: Provenance) {
        self.provenance = provenance;
    }

    /// Equality on everything except provenance.
    pub fn same_content(&self, other: &EntityNode) -> bool {
        self.id == other.id
            && self.ranking == other.ranking
            && self.centroid == other.centroid
            && self.stddev == other.stddev
            && self.bbox == other.bbox
    }
}

/// Centroid distance between two nodes.
pub fn centroid_distance(a: &EntityNode, b: &EntityNode) -> f64 {
    a.centroid_distance(b)
}

/// Directed predicate `subject -> object`.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationEdge {
    subject: InstanceId,
    object: InstanceId,
    ranking: Ranking,
}

impl RelationEdge {
    pub fn new(subject: InstanceId, predicate: impl Into<String>, object: InstanceId) -> Result<Self> {
        Self::with_ranking(subject, vec![(predicate.into(), 1.0)], object)
    }

    pub fn with_ranking(subject: InstanceId, ranking: Ranking, object: InstanceId) -> Result<Self> {
        if subject == object {
            return Err(Error::SelfLoop(subject));
        }
        check_ranking(&ranking, "predicate")?;
        Ok(Self {
            subject,
            object,
            ranking,
        })
    }

    pub fn subject(&self) -> InstanceId {
        self.subject
    }

    pub fn object(&self) -> InstanceId {
        self.object
    }

    pub fn predicate(&self) -> &str {
        &self.ranking[0].0
    }

    pub fn predicate_ranking(&self) -> &Ranking {
        &self.ranking
    }

    pub fn predicate_in_top_k(&self, predicate: &str, k: usize) -> bool {
        self.ranking.iter().take(k).any(|(p, _)| p == predicate)
    }

    pub fn key(&self) -> EdgeKey {
        EdgeKey {
            subject: self.subject,
            object: self.object,
            predicate: self.predicate().to_owned(),
        }
    }

    /// Same edge with endpoints replaced.
    pub fn reattached(&self, subject: InstanceId, object: InstanceId) -> Result<Self> {
        Self::with_ranking(subject, self.ranking.clone(), object)
    }
}

/// Canonical edge ordering: subject, then object, then predicate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub subject: InstanceId,
    pub object: InstanceId,
    pub predicate: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneGraph {
    frame_tag: String,
    nodes: BTreeMap<InstanceId, EntityNode>,
    edges: BTreeMap<EdgeKey, RelationEdge>,
    // undirected adjacency with edge multiplicity
    adjacency: BTreeMap<InstanceId, BTreeMap<InstanceId, u32>>,
}

impl Default for SceneGraph {
    fn default() -> Self {
        Self::new("world")
    }
}

impl SceneGraph {
    pub fn new(frame_tag: impl Into<String>) -> Self {
        Self {
            frame_tag: frame_tag.into(),
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            adjacency: BTreeMap::new(),
        }
    }

    pub fn frame_tag(&self) -> &str {
        &self.frame_tag
    }

    pub fn set_frame_tag(&mut self, tag: impl Into<String>) {
        self.frame_tag = tag.into();
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains_node(&self, id: InstanceId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn node(&self, id: InstanceId) -> Option<&EntityNode> {
        self.nodes.get(&id)
    }

    pub(crate) fn node_mut(&mut self, id: InstanceId) -> Option<&mut EntityNode> {
        self.nodes.get_mut(&id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &EntityNode> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = InstanceId> + '_ {
        self.nodes.keys().copied()
    }

    /// Edges in canonical key order.
    pub fn edges(&self) -> impl Iterator<Item = &RelationEdge> {
        self.edges.values()
    }

    pub fn contains_edge(&self, key: &EdgeKey) -> bool {
        self.edges.contains_key(key)
    }

    /// Smallest id strictly greater than every id in the graph.
    pub fn next_free_id(&self) -> InstanceId {
        self.nodes
            .keys()
            .next_back()
            .map_or(InstanceId(0), |id| InstanceId(id.0 + 1))
    }

    pub fn insert_node(&mut self, node: EntityNode) -> Result<()> {
        if self.nodes.contains_key(&node.id) {
            return Err(Error::DuplicateNode(node.id));
        }
        self.adjacency.insert(node.id, BTreeMap::new());
        self.nodes.insert(node.id, node);
        Ok(())
    }

    /// Removes a node together with all incident edges.
    pub fn remove_node(&mut self, id: InstanceId) -> Result<EntityNode> {
        let node = self.nodes.remove(&id).ok_or(Error::UnknownNode(id))?;
        let keys: Vec<EdgeKey> = self
            .edges
            .keys()
            .filter(|k| k.subject == id || k.object == id)
            .cloned()
            .collect();
        for key in keys {
            self.remove_edge(&key);
        }
        self.adjacency.remove(&id);
        Ok(node)
    }

    pub fn insert_edge(&mut self, edge: RelationEdge) -> Result<()> {
        let key = edge.key();
        if !self.nodes.contains_key(&key.subject) || !self.nodes.contains_key(&key.object) {
            return Err(Error::DanglingEdge {
                subject: key.subject,
                object: key.object,
            });
        }
        if self.edges.contains_key(&key) {
            return Err(Error::DuplicateEdge {
                subject: key.subject,
                predicate: key.predicate,
                object: key.object,
            });
        }
        self.link(key.subject, key.object);
        self.edges.insert(key, edge);
        Ok(())
    }

    pub fn remove_edge(&mut self, key: &EdgeKey) -> Option<RelationEdge> {
        let edge = self.edges.remove(key)?;
        self.unlink(key.subject, key.object);
        Some(edge)
    }

    /// Directed edges `subject -> object`, any predicate.
    pub fn edges_between(&self, subject: InstanceId, object: InstanceId) -> impl Iterator<Item = &RelationEdge> {
        let start = EdgeKey {
            subject,
            object,
            predicate: String::new(),
        };
        self.edges
            .range(start..)
            .take_while(move |(k, _)| k.subject == subject && k.object == object)
            .map(|(_, e)| e)
    }

    pub fn remove_edges_between(&mut self, subject: InstanceId, object: InstanceId) -> Vec<RelationEdge> {
        let keys: Vec<EdgeKey> = self.edges_between(subject, object).map(|e| e.key()).collect();
        keys.iter().filter_map(|k| self.remove_edge(k)).collect()
    }

    /// Undirected neighbors of `id`, ascending, excluding `id`.
    pub fn neighbors(&self, id: InstanceId) -> Result<Vec<InstanceId>> {
        self.adjacency
            .get(&id)
            .map(|m| m.keys().copied().collect())
            .ok_or(Error::UnknownNode(id))
    }

    pub(crate) fn neighbor_iter(&self, id: InstanceId) -> impl Iterator<Item = InstanceId> + '_ {
        self.adjacency.get(&id).into_iter().flat_map(|m| m.keys().copied())
    }

    pub fn are_adjacent(&self, a: InstanceId, b: InstanceId) -> bool {
        self.adjacency.get(&a).is_some_and(|m| m.contains_key(&b))
    }

    pub fn degree(&self, id: InstanceId) -> usize {
        self.edges.keys().filter(|k| k.subject == id || k.object == id).count()
    }

    /// Subgraph induced by the nodes accepted by `keep`.
    pub fn induced(&self, mut keep: impl FnMut(&EntityNode) -> bool) -> SceneGraph {
        let mut out = SceneGraph::new(self.frame_tag.clone());
        for node in self.nodes.values() {
            if keep(node) {
                out.nodes.insert(node.id, node.clone());
                out.adjacency.insert(node.id, BTreeMap::new());
            }
        }
        for (key, edge) in &self.edges {
            if out.nodes.contains_key(&key.subject) && out.nodes.contains_key(&key.object) {
                out.link(key.subject, key.object);
                out.edges.insert(key.clone(), edge.clone());
            }
        }
        out
    }

    /// Equality ignoring node provenance and the frame tag.
    pub fn same_content(&self, other: &SceneGraph) -> bool {
        self.nodes.len() == other.nodes.len()
            && self
                .nodes
                .values()
                .zip(other.nodes.values())
                .all(|(a, b)| a.same_content(b))
            && self.edges == other.edges
    }

    /// Checks every structural invariant. Used by tests and after decoding.
    pub fn check_invariants(&self) -> Result<()> {
        for (id, node) in &self.nodes {
            if *id != node.id {
                return Err(Error::InvalidData(format!("node key {id} holds node {}", node.id)));
            }
            if !node.bbox.contains_point(node.centroid) {
                return Err(Error::InvalidNode(format!("centroid of {id} outside bbox")));
            }
            check_ranking(&node.ranking, "label")?;
        }
        let mut expected: BTreeMap<InstanceId, BTreeMap<InstanceId, u32>> =
            self.nodes.keys().map(|id| (*id, BTreeMap::new())).collect();
        for (key, edge) in &self.edges {
            if *key != edge.key() {
                return Err(Error::InvalidData("edge key mismatch".into()));
            }
            if key.subject == key.object {
                return Err(Error::SelfLoop(key.subject));
            }
            if !self.nodes.contains_key(&key.subject) || !self.nodes.contains_key(&key.object) {
                return Err(Error::DanglingEdge {
                    subject: key.subject,
                    object: key.object,
                });
            }
            *expected.get_mut(&key.subject).unwrap().entry(key.object).or_default() += 1;
            *expected.get_mut(&key.object).unwrap().entry(key.subject).or_default() += 1;
        }
        if expected != self.adjacency {
            return Err(Error::InvalidData("adjacency index out of sync".into()));
        }
        Ok(())
    }

    fn link(&mut self, a: InstanceId, b: InstanceId) {
        *self.adjacency.entry(a).or_default().entry(b).or_default() += 1;
        *self.adjacency.entry(b).or_default().entry(a).or_default() += 1;
    }

    fn unlink(&mut self, a: InstanceId, b: InstanceId) {
        for (x, y) in [(a, b), (b, a)] {
            if let Some(m) = self.adjacency.get_mut(&x) {
                if let Some(c) = m.get_mut(&y) {
                    *c -= 1;
                    if *c == 0 {
                        m.remove(&y);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn node(id: u64, label: &str, x: f64) -> EntityNode {
        let bbox = Aabb::new([x, 0.0, 0.0], [x + 1.0, 1.0, 1.0]).unwrap();
        EntityNode::new(InstanceId(id), label, bbox.center(), bbox).unwrap()
    }

    fn chain() -> SceneGraph {
        let mut g = SceneGraph::default();
        for (i, l) in ["a", "b", "c"].iter().enumerate() {
            g.insert_node(node(i as u64, l, i as f64 * 2.0)).unwrap();
        }
        g.insert_edge(RelationEdge::new(InstanceId(0), "left", InstanceId(1)).unwrap())
            .unwrap();
        g.insert_edge(RelationEdge::new(InstanceId(2), "right", InstanceId(1)).unwrap())
            .unwrap();
        g
    }

    #[test]
    fn neighbors_of_chain_and_isolated() {
        let mut g = chain();
        assert_eq!(g.neighbors(InstanceId(1)).unwrap(), vec![InstanceId(0), InstanceId(2)]);
        g.insert_node(node(9, "d", 20.0)).unwrap();
        assert!(g.neighbors(InstanceId(9)).unwrap().is_empty());
        assert!(matches!(g.neighbors(InstanceId(42)), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn rejects_bad_edges() {
        let mut g = chain();
        assert!(matches!(
            g.insert_edge(RelationEdge::new(InstanceId(0), "left", InstanceId(1)).unwrap()),
            Err(Error::DuplicateEdge { .. })
        ));
        assert!(matches!(
            g.insert_edge(RelationEdge::new(InstanceId(0), "left", InstanceId(7)).unwrap()),
            Err(Error::DanglingEdge { .. })
        ));
        assert!(matches!(
            RelationEdge::new(InstanceId(0), "left", InstanceId(0)),
            Err(Error::SelfLoop(_))
        ));
        assert!(matches!(g.insert_node(node(0, "x", 0.0)), Err(Error::DuplicateNode(_))));
    }

    #[test]
    fn node_invariants() {
        let bbox = Aabb::unit();
        assert!(EntityNode::new(InstanceId(0), "a", [2.0, 0.0, 0.0], bbox).is_err());
        assert!(EntityNode::with_ranking(InstanceId(0), vec![], [0.5; 3], bbox).is_err());
        assert!(EntityNode::with_ranking(
            InstanceId(0),
            vec![("a".into(), 0.2), ("b".into(), 0.5)],
            [0.5; 3],
            bbox
        )
        .is_err());
        let n = EntityNode::new(InstanceId(0), "a", [0.5; 3], bbox).unwrap();
        assert_eq!(n.volume(), 1.0);
        assert_eq!(n.max_length(), 1.0);
        assert!(n.with_stddev(-1.0).is_err());
    }

    #[test]
    fn parallel_edges_keep_adjacency_until_last_removed() {
        let mut g = chain();
        g.insert_edge(RelationEdge::new(InstanceId(1), "close by", InstanceId(0)).unwrap())
            .unwrap();
        g.remove_edges_between(InstanceId(0), InstanceId(1));
        assert!(g.are_adjacent(InstanceId(0), InstanceId(1)));
        g.remove_edges_between(InstanceId(1), InstanceId(0));
        assert!(!g.are_adjacent(InstanceId(0), InstanceId(1)));
        g.check_invariants().unwrap();
    }

    #[test]
    fn remove_node_drops_incident_edges() {
        let mut g = chain();
        g.remove_node(InstanceId(1)).unwrap();
        assert_eq!(g.edge_count(), 0);
        g.check_invariants().unwrap();
    }

    #[derive(Debug, Clone)]
    enum Op {
        AddNode(u64),
        RemoveNode(u64),
        AddEdge(u64, u8, u64),
        RemoveEdge(u64, u64),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0u64..12).prop_map(Op::AddNode),
            (0u64..12).prop_map(Op::RemoveNode),
            (0u64..12, 0u8..3, 0u64..12).prop_map(|(a, p, b)| Op::AddEdge(a, p, b)),
            (0u64..12, 0u64..12).prop_map(|(a, b)| Op::RemoveEdge(a, b)),
        ]
    }

    proptest! {
        #[test]
        fn integrity_survives_random_mutation(ops in prop::collection::vec(op(), 0..80)) {
            let mut g = SceneGraph::default();
            for op in ops {
                match op {
                    Op::AddNode(i) => { let _ = g.insert_node(node(i, "x", i as f64 * 3.0)); }
                    Op::RemoveNode(i) => { let _ = g.remove_node(InstanceId(i)); }
                    Op::AddEdge(a, p, b) => {
                        if let Ok(e) = RelationEdge::new(InstanceId(a), ["on", "near", "left"][p as usize], InstanceId(b)) {
                            let _ = g.insert_edge(e);
                        }
                    }
                    Op::RemoveEdge(a, b) => { g.remove_edges_between(InstanceId(a), InstanceId(b)); }
                }
                prop_assert!(g.check_invariants().is_ok());
            }
            // neighbor sets match an edge scan and are symmetric
            for id in g.node_ids() {
                let scan: BTreeSet<InstanceId> = g.edges()
                    .filter_map(|e| if e.subject() == id { Some(e.object()) } else if e.object() == id { Some(e.subject()) } else { None })
                    .collect();
                let got: BTreeSet<InstanceId> = g.neighbors(id).unwrap().into_iter().collect();
                prop_assert_eq!(&scan, &got);
                for n in got {
                    prop_assert!(g.neighbors(n).unwrap().contains(&id));
                }
            }
        }
    }
}
