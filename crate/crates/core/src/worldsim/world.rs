use std::path::Path;

use rand::seq::{index, IndexedRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dynamics::{DynamicsSchedule, Move};
use super::vocab::{take_vocab, OBJECT_CLASSES, PREDICATES};
use crate::codec::{self, write_aabb, write_f64, write_str, write_vec3, GraphRecord, NodeRecord};
use crate::error::{Error, Result};
use crate::geometry::{distance, quantize, quantize3, Aabb, Vec3};
use crate::graph::{AgentId, EntityNode, InstanceId, Provenance, RelationEdge, RoomId, SceneGraph};

#[derive(Clone, Debug, PartialEq)]
pub struct Room {
    pub id: RoomId,
    pub bounds: Aabb,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub labels: Vec<String>,
    pub predicates: Vec<String>,
}

/// Ground-truth world: rooms, the true scene graph over all instances, and
/// an optional dynamics schedule for the rescan pass.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthWorld {
    pub rooms: Vec<Room>,
    pub graph: SceneGraph,
    pub vocab: Vocabulary,
    pub dynamics: Option<DynamicsSchedule>,
}

impl GroundTruthWorld {
    pub fn room(&self, id: RoomId) -> Option<&Room> {
        self.rooms.iter().find(|r| r.id == id)
    }

    pub fn room_ids(&self) -> Vec<RoomId> {
        self.rooms.iter().map(|r| r.id).collect()
    }

    /// Ground-truth subgraph of one room.
    pub fn room_graph(&self, room: RoomId) -> SceneGraph {
        self.graph.induced(|n| n.provenance().room == room)
    }

    pub fn room_of(&self, id: InstanceId) -> Option<RoomId> {
        self.graph.node(id).map(|n| n.provenance().room)
    }

    pub fn validate(&self) -> Result<()> {
        self.graph.check_invariants()?;
        for n in self.graph.nodes() {
            let room = self
                .room(n.provenance().room)
                .ok_or_else(|| Error::InvalidData(format!("{} references unknown {}", n.id(), n.provenance().room)))?;
            if !room.bounds.contains_point(n.centroid()) {
                return Err(Error::InvalidData(format!(
                    "centroid of {} lies outside {}",
                    n.id(),
                    room.id
                )));
            }
        }
        for e in self.graph.edges() {
            if self.room_of(e.subject()) != self.room_of(e.object()) {
                return Err(Error::InvalidData(format!(
                    "relation {} -> {} crosses rooms",
                    e.subject(),
                    e.object()
                )));
            }
        }
        Ok(())
    }
}

/// World generator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldParams {
    pub n_rooms: usize,
    /// Inclusive range of instances per room.
    pub instances_per_room: [usize; 2],
    pub label_vocab: usize,
    pub predicate_vocab: usize,
    /// Target relations per node; rooms get `round(edges_per_node * n)` edges.
    pub edges_per_node: f64,
    pub room_size: Vec3,
    /// Placement cell; every instance occupies its own cell.
    pub cell_size: Vec3,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self::full_scale()
    }
}

impl WorldParams {
    /// 47 rooms sized to match the unified 3RScan test domain
    /// (about 1,588 nodes and 5,546 edges).
    pub fn full_scale() -> Self {
        Self {
            n_rooms: 47,
            instances_per_room: [30, 38],
            label_vocab: OBJECT_CLASSES.len(),
            predicate_vocab: PREDICATES.len(),
            edges_per_node: 5546.0 / 1588.0,
            room_size: [6.0, 6.0, 3.0],
            cell_size: [1.0, 1.0, 1.5],
        }
    }

    pub fn with_rooms(mut self, n_rooms: usize) -> Self {
        self.n_rooms = n_rooms;
        self
    }

    fn cells_per_axis(&self) -> [usize; 3] {
        [0, 1, 2].map(|i| (self.room_size[i] / self.cell_size[i] + 1e-9).floor() as usize)
    }

    pub fn room_capacity(&self) -> usize {
        self.cells_per_axis().iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rooms < 1 {
            return Err(Error::InfeasibleWorld("at least one room is required".into()));
        }
        let [lo, hi] = self.instances_per_room;
        if lo > hi {
            return Err(Error::InfeasibleWorld(format!("instance range {lo}..={hi} is empty")));
        }
        if (0..3).any(|i| {
            (self.cell_size[i].is_nan() || self.cell_size[i] <= 0.0)
                || self.room_size[i].is_nan()
                || self.room_size[i] < self.cell_size[i]
        }) {
            return Err(Error::InfeasibleWorld("room must hold at least one cell".into()));
        }
        if hi > self.room_capacity() {
            return Err(Error::InfeasibleWorld(format!(
                "{hi} instances exceed the room capacity of {} cells",
                self.room_capacity()
            )));
        }
        if self.label_vocab < 1 || self.predicate_vocab < 1 {
            return Err(Error::InfeasibleWorld("vocabularies must be non-empty".into()));
        }
        if !(self.edges_per_node >= 0.0 && self.edges_per_node.is_finite()) {
            return Err(Error::InfeasibleWorld("edges_per_node must be >= 0".into()));
        }
        Ok(())
    }
}

/// Proximity rule for relations inside one room: a minimum spanning tree
/// over centroid distance, then the closest remaining pairs until `target`
/// pairs exist. Pairs come back as `(a, b)` with `a < b`.
pub(crate) fn proximity_pairs(points: &[(InstanceId, Vec3)], target: usize) -> Vec<(InstanceId, InstanceId)> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let key = |i: usize, j: usize| {
        let (a, b) = (points[i].0, points[j].0);
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    };
    let mut chosen = std::collections::BTreeSet::new();
    // Prim
    let mut in_tree = vec![false; n];
    let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, 0); n];
    in_tree[0] = true;
    for j in 1..n {
        best[j] = (distance(points[0].1, points[j].1), 0);
    }
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !in_tree[j])
            .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0).then(points[a].0.cmp(&points[b].0)))
            .unwrap();
        in_tree[next] = true;
        chosen.insert(key(next, best[next].1));
        for j in 0..n {
            if !in_tree[j] {
                let d = distance(points[next].1, points[j].1);
                if d < best[j].0 {
                    best[j] = (d, next);
                }
            }
        }
    }
    let max_pairs = n * (n - 1) / 2;
    let target = target.min(max_pairs);
    if chosen.len() < target {
        let mut rest: Vec<(f64, (InstanceId, InstanceId))> = Vec::with_capacity(max_pairs);
        for i in 0..n {
            for j in i + 1..n {
                let k = key(i, j);
                if !chosen.contains(&k) {
                    rest.push((distance(points[i].1, points[j].1), k));
                }
            }
        }
        rest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, k) in rest.into_iter().take(target - chosen.len()) {
            chosen.insert(k);
        }
    }
    chosen.into_iter().collect()
}

/// The `k` candidates closest to `here`, ties broken by id.
pub(crate) fn proximity_pairs_for(here: Vec3, candidates: &[(InstanceId, Vec3)], k: usize) -> Vec<InstanceId> {
    let mut ranked: Vec<(f64, InstanceId)> = candidates.iter().map(|(id, c)| (distance(here, *c), *id)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().take(k).map(|(_, id)| id).collect()
}

pub(crate) fn random_edge<R: Rng + ?Sized>(
    a: InstanceId,
    b: InstanceId,
    predicates: &[String],
    rng: &mut R,
) -> Result<RelationEdge> {
    let (s, o) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
    let p = predicates.choose(rng).expect("non-empty predicate vocabulary");
    RelationEdge::new(s, p.clone(), o)
}

/// Point-spread proxy for a box: RMS distance of uniformly spread points
/// from the centre.
fn box_stddev(b: &Aabb) -> f64 {
    let e = b.extents();
    ((e[0] * e[0] + e[1] * e[1] + e[2] * e[2]) / 12.0).sqrt()
}

pub fn generate_world<R: Rng + ?Sized>(params: &WorldParams, rng: &mut R) -> Result<GroundTruthWorld> {
    params.validate()?;
    let vocab = Vocabulary {
        labels: take_vocab(OBJECT_CLASSES, params.label_vocab, "object"),
        predicates: take_vocab(PREDICATES, params.predicate_vocab, "relation"),
    };
    let cols = (params.n_rooms as f64).sqrt().ceil() as usize;
    let [nx, ny, _] = params.cells_per_axis();
    let capacity = params.room_capacity();
    let mut graph = SceneGraph::new("world");
    let mut rooms = Vec::with_capacity(params.n_rooms);
    let mut next_id = 0u64;

    for r in 0..params.n_rooms {
        let room_id = RoomId(r as u32);
        let origin = [
            (r % cols) as f64 * params.room_size[0],
            (r / cols) as f64 * params.room_size[1],
            0.0,
        ];
        let bounds = Aabb::new(
            origin,
            [
                origin[0] + params.room_size[0],
                origin[1] + params.room_size[1],
                params.room_size[2],
            ],
        )?;
        rooms.push(Room { id: room_id, bounds });

        let count = rng.random_range(params.instances_per_room[0]..=params.instances_per_room[1]);
        let cells = index::sample(rng, capacity, count);
        let mut points = Vec::with_capacity(count);
        for cell in cells {
            let idx = [cell % nx, (cell / nx) % ny, cell / (nx * ny)];
            let mut min = [0.0; 3];
            let mut max = [0.0; 3];
            for i in 0..3 {
                let c = params.cell_size[i];
                let size = c * rng.random_range(0.2..0.9);
                let lo = origin[i] + idx[i] as f64 * c + rng.random_range(0.0..(c - size));
                min[i] = quantize(lo);
                max[i] = quantize(lo + size);
            }
            let bbox = Aabb::new(min, max)?;
            let id = InstanceId(next_id);
            next_id += 1;
            let label = vocab.labels.choose(rng).unwrap().clone();
            let node = EntityNode::new(id, label, quantize3(bbox.center()), bbox)?
                .with_stddev(quantize(box_stddev(&bbox)))?
                .with_provenance(Provenance {
                    agent: AgentId::ANNOTATION,
                    room: room_id,
                    t: 0,
                    gt: Some(id),
                });
            points.push((id, node.centroid()));
            graph.insert_node(node)?;
        }
        let target = (params.edges_per_node * count as f64).round() as usize;
        for (a, b) in proximity_pairs(&points, target) {
            graph.insert_edge(random_edge(a, b, &vocab.predicates, rng)?)?;
        }
    }

    Ok(GroundTruthWorld {
        rooms,
        graph,
        vocab,
        dynamics: None,
    })
}

/// Canonical world file: the graph schema plus `rooms`, `vocab` and an
/// optional `dynamics` block, keys sorted.
pub fn serialize_world(world: &GroundTruthWorld) -> Vec<u8> {
    let mut out = String::new();
    out.push('{');
    if let Some(d) = &world.dynamics {
        out.push_str("\"dynamics\":{");
        if !d.appeared.is_empty() {
            out.push_str("\"appeared\":[");
            for (i, n) in d.appeared.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                codec::write_node(&mut out, n);
            }
            out.push_str("],");
        }
        out.push_str("\"changed\":[");
        for (i, (id, label)) in d.changed.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{{\"id\":{},\"label\":", id.0));
            write_str(&mut out, label);
            out.push('}');
        }
        out.push_str("],\"moved\":[");
        for (i, m) in d.moved.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{{\"id\":{},\"translation\":", m.id.0));
            write_vec3(&mut out, m.translation);
            out.push('}');
        }
        out.push_str("],\"removed\":[");
        let removed: Vec<String> = d.removed.iter().map(|id| id.0.to_string()).collect();
        out.push_str(&removed.join(","));
        out.push_str("]},");
    }
    out.push_str("\"edges\":");
    codec::write_edges(&mut out, &world.graph);
    out.push_str(",\"frame_tag\":");
    write_str(&mut out, world.graph.frame_tag());
    out.push_str(",\"nodes\":");
    codec::write_nodes(&mut out, &world.graph);
    out.push_str(",\"rooms\":[");
    for (i, r) in world.rooms.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str("{\"bounds\":");
        write_aabb(&mut out, &r.bounds);
        out.push_str(&format!(",\"id\":{}}}", r.id.0));
    }
    out.push_str("],\"vocab\":{\"labels\":[");
    for (i, l) in world.vocab.labels.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_str(&mut out, l);
    }
    out.push_str("],\"predicates\":[");
    for (i, p) in world.vocab.predicates.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_str(&mut out, p);
    }
    out.push_str("]}}");
    let _ = write_f64; // numbers go through write_vec3/write_aabb
    out.into_bytes()
}

#[derive(Deserialize)]
struct RoomRecord {
    id: u32,
    bounds: codec::BoxRecord,
}

#[derive(Deserialize)]
struct MoveRecord {
    id: u64,
    translation: Vec3,
}

#[derive(Deserialize)]
struct ChangeRecord {
    id: u64,
    label: String,
}

#[derive(Deserialize)]
struct DynamicsRecord {
    #[serde(default)]
    moved: Vec<MoveRecord>,
    #[serde(default)]
    removed: Vec<u64>,
    #[serde(default)]
    changed: Vec<ChangeRecord>,
    #[serde(default)]
    appeared: Vec<NodeRecord>,
}

#[derive(Deserialize)]
struct WorldRecord {
    #[serde(flatten)]
    graph: GraphRecord,
    rooms: Vec<RoomRecord>,
    #[serde(default)]
    vocab: Option<Vocabulary>,
    #[serde(default)]
    dynamics: Option<DynamicsRecord>,
}

pub fn deserialize_world(bytes: &[u8]) -> Result<GroundTruthWorld> {
    let record: WorldRecord = serde_json::from_slice(bytes)?;
    let graph = record.graph.into_graph()?;
    let rooms = record
        .rooms
        .into_iter()
        .map(|r| {
            Ok(Room {
                id: RoomId(r.id),
                bounds: Aabb::new(r.bounds.min, r.bounds.max)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let vocab = match record.vocab {
        Some(v) => v,
        None => {
            // derive from the graph when the file carries no vocabulary
            let mut labels: Vec<String> = graph.nodes().map(|n| n.label().to_owned()).collect();
            labels.sort();
            labels.dedup();
            let mut predicates: Vec<String> = graph.edges().map(|e| e.predicate().to_owned()).collect();
            predicates.sort();
            predicates.dedup();
            Vocabulary { labels, predicates }
        }
    };
    let dynamics = record
        .dynamics
        .map(|d| {
            Ok::<_, Error>(DynamicsSchedule {
                moved: d
                    .moved
                    .into_iter()
                    .map(|m| Move {
                        id: InstanceId(m.id),
                        translation: m.translation,
                    })
                    .collect(),
                removed: d.removed.into_iter().map(InstanceId).collect(),
                changed: d.changed.into_iter().map(|c| (InstanceId(c.id), c.label)).collect(),
                appeared: d
                    .appeared
                    .into_iter()
                    .map(NodeRecord::into_node)
                    .collect::<Result<Vec<_>>>()?,
            })
        })
        .transpose()?;
    let world = GroundTruthWorld {
        rooms,
        graph,
        vocab,
        dynamics,
    };
    world.validate()?;
    Ok(world)
}

pub fn read_world(path: impl AsRef<Path>) -> Result<GroundTruthWorld> {
    deserialize_world(&std::fs::read(path)?)
}

pub fn write_world(path: impl AsRef<Path>, world: &GroundTruthWorld) -> Result<()> {
    std::fs::write(path, serialize_world(world))?;
    Ok(())
}
