//! Canonical scene-graph encoding.
//!
//! Graphs are written as compact JSON with lexicographically sorted keys,
//! nodes in ascending id order, edges in `(subject, object, predicate)`
//! order, and every real number printed with exactly six decimals. The
//! output for a given graph is therefore byte-stable, which is what the
//! traffic accounting and golden files rely on.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::graph::{AgentId, EntityNode, InstanceId, Provenance, RelationEdge, RoomId, SceneGraph};

pub(crate) fn write_f64(out: &mut String, x: f64) {
    let s = format!("{x:.6}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        out.push_str(&s[1..]);
    } else {
        out.push_str(&s);
    }
}

pub(crate) fn write_str(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("string encoding is infallible"));
}

pub(crate) fn write_vec3(out: &mut String, v: Vec3) {
    out.push('[');
    for (i, c) in v.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_f64(out, *c);
    }
    out.push(']');
}

pub(crate) fn write_aabb(out: &mut String, b: &Aabb) {
    out.push_str("{\"max\":");
    write_vec3(out, b.max());
    out.push_str(",\"min\":");
    write_vec3(out, b.min());
    out.push('}');
}

fn write_ranking(out: &mut String, ranking: &[(String, f64)]) {
    out.push('[');
    for (i, (name, score)) in ranking.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('[');
        write_str(out, name);
        out.push(',');
        write_f64(out, *score);
        out.push(']');
    }
    out.push(']');
}

pub(crate) fn write_node(out: &mut String, n: &EntityNode) {
    out.push_str("{\"bbox\":");
    write_aabb(out, n.bbox());
    out.push_str(",\"centroid\":");
    write_vec3(out, n.centroid());
    let _ = write!(out, ",\"id\":{},\"label\":", n.id().0);
    write_str(out, n.label());
    out.push_str(",\"label_ranking\":");
    write_ranking(out, n.label_ranking());
    let p = n.provenance();
    let _ = write!(out, ",\"provenance\":{{\"agent\":{}", p.agent.0);
    if let Some(gt) = p.gt {
        let _ = write!(out, ",\"gt\":{}", gt.0);
    }
    let _ = write!(out, ",\"room\":{},\"t\":{}}}", p.room.0, p.t);
    out.push_str(",\"stddev\":");
    write_f64(out, n.stddev());
    out.push('}');
}

pub(crate) fn write_edge(out: &mut String, e: &RelationEdge) {
    let _ = write!(out, "{{\"object\":{},\"predicate\":", e.object().0);
    write_str(out, e.predicate());
    out.push_str(",\"predicate_ranking\":");
    write_ranking(out, e.predicate_ranking());
    let _ = write!(out, ",\"subject\":{}}}", e.subject().0);
}

pub(crate) fn write_edges(out: &mut String, g: &SceneGraph) {
    out.push('[');
    for (i, e) in g.edges().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_edge(out, e);
    }
    out.push(']');
}

pub(crate) fn write_nodes(out: &mut String, g: &SceneGraph) {
    out.push('[');
    for (i, n) in g.nodes().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_node(out, n);
    }
    out.push(']');
}

/// Canonical bytes of a graph.
pub fn serialize_graph(g: &SceneGraph) -> Vec<u8> {
    let mut out = String::with_capacity(256 * (g.node_count() + 1));
    out.push_str("{\"edges\":");
    write_edges(&mut out, g);
    out.push_str(",\"frame_tag\":");
    write_str(&mut out, g.frame_tag());
    out.push_str(",\"nodes\":");
    write_nodes(&mut out, g);
    out.push('}');
    out.into_bytes()
}

/// Size in bytes of the canonical encoding; the unit of traffic accounting.
pub fn message_bytes(g: &SceneGraph) -> usize {
    serialize_graph(g).len()
}

#[derive(Deserialize)]
pub(crate) struct BoxRecord {
    pub min: Vec3,
    pub max: Vec3,
}

#[derive(Deserialize)]
pub(crate) struct ProvenanceRecord {
    #[serde(default)]
    pub agent: u32,
    #[serde(default)]
    pub room: u32,
    #[serde(default)]
    pub t: u64,
    #[serde(default)]
    pub gt: Option<u64>,
}

#[derive(Deserialize)]
pub(crate) struct NodeRecord {
    pub id: u64,
    pub label: String,
    #[serde(default)]
    pub label_ranking: Option<Vec<(String, f64)>>,
    pub centroid: Vec3,
    #[serde(default)]
    pub stddev: f64,
    pub bbox: BoxRecord,
    #[serde(default)]
    pub provenance: Option<ProvenanceRecord>,
}

#[derive(Deserialize)]
pub(crate) struct EdgeRecord {
    pub subject: u64,
    pub predicate: String,
    #[serde(default)]
    pub predicate_ranking: Option<Vec<(String, f64)>>,
    pub object: u64,
}

#[derive(Deserialize)]
pub(crate) struct GraphRecord {
    #[serde(default = "default_frame")]
    pub frame_tag: String,
    #[serde(default)]
    pub nodes: Vec<NodeRecord>,
    #[serde(default)]
    pub edges: Vec<EdgeRecord>,
}

fn default_frame() -> String {
    "world".to_owned()
}

fn ranking_or_label(ranking: Option<Vec<(String, f64)>>, label: &str, what: &str) -> Result<Vec<(String, f64)>> {
    match ranking {
        None => Ok(vec![(label.to_owned(), 1.0)]),
        Some(r) => {
            if r.first().map(|(l, _)| l.as_str()) != Some(label) {
                return Err(Error::InvalidData(format!("{what} ranking must start with {label:?}")));
            }
            Ok(r)
        }
    }
}

impl NodeRecord {
    pub(crate) fn into_node(self) -> Result<EntityNode> {
        let ranking = ranking_or_label(self.label_ranking, &self.label, "label")?;
        let bbox = Aabb::new(self.bbox.min, self.bbox.max)?;
        let p = self.provenance.unwrap_or(ProvenanceRecord {
            agent: 0,
            room: 0,
            t: 0,
            gt: None,
        });
        Ok(
            EntityNode::with_ranking(InstanceId(self.id), ranking, self.centroid, bbox)?
                .with_stddev(self.stddev)?
                .with_provenance(Provenance {
                    agent: AgentId(p.agent),
                    room: RoomId(p.room),
                    t: p.t,
                    gt: p.gt.map(InstanceId),
                }),
        )
    }
}

impl EdgeRecord {
    pub(crate) fn into_edge(self) -> Result<RelationEdge> {
        let ranking = ranking_or_label(self.predicate_ranking, &self.predicate, "predicate")?;
        RelationEdge::with_ranking(InstanceId(self.subject), ranking, InstanceId(self.object))
    }
}

impl GraphRecord {
    pub(crate) fn into_graph(self) -> Result<SceneGraph> {
        let mut g = SceneGraph::new(self.frame_tag);
        for (i, n) in self.nodes.into_iter().enumerate() {
            let node = n
                .into_node()
                .map_err(|e| Error::InvalidData(format!("nodes[{i}]: {e}")))?;
            g.insert_node(node)
                .map_err(|e| Error::InvalidData(format!("nodes[{i}]: {e}")))?;
        }
        for (i, e) in self.edges.into_iter().enumerate() {
            let edge = e
                .into_edge()
                .map_err(|err| Error::InvalidData(format!("edges[{i}]: {err}")))?;
            g.insert_edge(edge)
                .map_err(|err| Error::InvalidData(format!("edges[{i}]: {err}")))?;
        }
        Ok(g)
    }
}

/// Parses a graph file. Syntax errors carry line and column.
pub fn deserialize_graph(bytes: &[u8]) -> Result<SceneGraph> {
    let record: GraphRecord = serde_json::from_slice(bytes)?;
    record.into_graph()
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<SceneGraph> {
    deserialize_graph(&std::fs::read(path)?)
}

pub fn write_graph(path: impl AsRef<Path>, g: &SceneGraph) -> Result<()> {
    std::fs::write(path, serialize_graph(g))?;
    Ok(())
}
