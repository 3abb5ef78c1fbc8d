//! Reader for the 3DSSG annotation layout (`objects.json` and
//! `relationships.json`). Each scan becomes one room; scans are laid out
//! side by side on a grid so their local frames do not collide.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Deserialize;

use super::vocab::{OBJECT_CLASSES, PREDICATES};
use super::world::{GroundTruthWorld, Room, Vocabulary};
use crate::error::{Error, Result};
use crate::geometry::{quantize, quantize3, Aabb, Vec3};
use crate::graph::{AgentId, EntityNode, InstanceId, Provenance, RelationEdge, RoomId, SceneGraph};

/// Object id, label and box within one scan.
type ScanObject = (u64, String, Aabb);

const ROOM_MARGIN: f64 = 0.5;
const DEFAULT_SIZE: f64 = 0.5;

#[derive(Deserialize)]
struct ObjectsFile {
    scans: Vec<ObjectScan>,
}

#[derive(Deserialize)]
struct ObjectScan {
    scan: String,
    #[serde(default)]
    objects: Vec<ObjectEntry>,
}

#[derive(Deserialize)]
struct Obb {
    centroid: Vec3,
    #[serde(rename = "axesLengths")]
    axes_lengths: Vec3,
}

#[derive(Deserialize)]
struct BoxEntry {
    min: Vec3,
    max: Vec3,
}

#[derive(Deserialize)]
struct ObjectEntry {
    id: IdField,
    label: String,
    #[serde(default)]
    obb: Option<Obb>,
    #[serde(default)]
    bbox: Option<BoxEntry>,
}

/// 3DSSG writes object ids as strings; accept numbers too.
#[derive(Deserialize)]
#[serde(untagged)]
enum IdField {
    Num(u64),
    Str(String),
}

impl IdField {
    fn parse(&self) -> Result<u64> {
        match self {
            IdField::Num(n) => Ok(*n),
            IdField::Str(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::InvalidData(format!("object id {s:?} is not an integer"))),
        }
    }
}

#[derive(Deserialize)]
struct RelationshipsFile {
    scans: Vec<RelationshipScan>,
}

#[derive(Deserialize)]
struct RelationshipScan {
    scan: String,
    #[serde(default)]
    relationships: Vec<(IdField, IdField, u64, String)>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| match Error::from(e) {
        Error::Parse { line, column, message } => Error::Parse {
            line,
            column,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn local_box(o: &ObjectEntry, scan: &str, slot: usize) -> Result<Aabb> {
    if let Some(b) = &o.bbox {
        return Aabb::new(b.min, b.max);
    }
    if let Some(obb) = &o.obb {
        // oriented boxes are treated as axis aligned
        return Aabb::from_center_size(obb.centroid, obb.axes_lengths.map(f64::abs));
    }
    log::warn!(
        "scan {scan}: object {:?} has no geometry, placing a default box",
        o.label
    );
    let x = slot as f64 * (DEFAULT_SIZE * 2.0);
    Aabb::new([x, 0.0, 0.0], [x + DEFAULT_SIZE, DEFAULT_SIZE, DEFAULT_SIZE])
}

pub fn ingest_3dssg(objects: impl AsRef<Path>, relationships: impl AsRef<Path>) -> Result<GroundTruthWorld> {
    let objects: ObjectsFile = read_json(objects.as_ref())?;
    let relationships: RelationshipsFile = read_json(relationships.as_ref())?;
    let known_labels: BTreeSet<&str> = OBJECT_CLASSES.iter().copied().collect();
    let known_predicates: BTreeSet<&str> = PREDICATES.iter().copied().collect();

    let mut scans: Vec<(String, Vec<ScanObject>)> = Vec::new();
    for scan in &objects.scans {
        if scans.iter().any(|(s, _)| s == &scan.scan) {
            return Err(Error::InvalidData(format!("scan {} listed twice", scan.scan)));
        }
        let mut entries = Vec::with_capacity(scan.objects.len());
        for (slot, o) in scan.objects.iter().enumerate() {
            let id = o.id.parse()?;
            if entries.iter().any(|(i, _, _)| *i == id) {
                return Err(Error::InvalidData(format!(
                    "scan {}: object {id} listed twice",
                    scan.scan
                )));
            }
            entries.push((id, o.label.clone(), local_box(o, &scan.scan, slot)?));
        }
        entries.sort_by_key(|e| e.0);
        scans.push((scan.scan.clone(), entries));
    }

    let cols = (scans.len().max(1) as f64).sqrt().ceil() as usize;
    let extents: Vec<Option<Aabb>> = scans
        .iter()
        .map(|(_, e)| e.iter().map(|x| x.2).reduce(|a, b| a.union(&b)))
        .collect();
    let cell = extents
        .iter()
        .flatten()
        .map(|b| b.extents()[0].max(b.extents()[1]))
        .fold(0.0, f64::max)
        + 2.0 * ROOM_MARGIN;

    let mut graph = SceneGraph::new("world");
    let mut rooms = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut ids: BTreeMap<(String, u64), InstanceId> = BTreeMap::new();
    let mut next = 0u64;
    for (r, ((scan, entries), extent)) in scans.iter().zip(&extents).enumerate() {
        let room_id = RoomId(r as u32);
        let origin = [(r % cols) as f64 * cell, (r / cols) as f64 * cell, 0.0];
        let shift = match extent {
            Some(b) => [0, 1, 2].map(|i| origin[i] + ROOM_MARGIN - b.min()[i]),
            None => origin,
        };
        let mut bounds: Option<Aabb> = None;
        for (local, label, b) in entries {
            if !known_labels.contains(label.as_str()) {
                log::warn!("scan {scan}: label {label:?} is not a built-in class, admitting it");
            }
            if !labels.contains(label) {
                labels.push(label.clone());
            }
            let bbox = b.translated(shift).quantized();
            let id = InstanceId(next);
            next += 1;
            ids.insert((scan.clone(), *local), id);
            let e = bbox.extents();
            let node = EntityNode::new(id, label.clone(), quantize3(bbox.center()), bbox)?
                .with_stddev(quantize(((e[0] * e[0] + e[1] * e[1] + e[2] * e[2]) / 12.0).sqrt()))?
                .with_provenance(Provenance {
                    agent: AgentId::ANNOTATION,
                    room: room_id,
                    t: 0,
                    gt: Some(id),
                });
            graph.insert_node(node)?;
            bounds = Some(bounds.map_or(bbox, |x| x.union(&bbox)));
        }
        let bounds = match bounds {
            Some(b) => Aabb::new(
                quantize3([0, 1, 2].map(|i| b.min()[i] - ROOM_MARGIN)),
                quantize3([0, 1, 2].map(|i| b.max()[i] + ROOM_MARGIN)),
            )?,
            None => Aabb::new(origin, [origin[0] + 1.0, origin[1] + 1.0, 1.0])?,
        };
        rooms.push(Room { id: room_id, bounds });
    }

    let mut predicates: Vec<String> = Vec::new();
    for scan in &relationships.scans {
        if !scans.iter().any(|(s, _)| s == &scan.scan) {
            log::warn!("relationships for unknown scan {} skipped", scan.scan);
            continue;
        }
        for (s, o, _pid, name) in &scan.relationships {
            let (s, o) = (s.parse()?, o.parse()?);
            let (Some(&subject), Some(&object)) = (ids.get(&(scan.scan.clone(), s)), ids.get(&(scan.scan.clone(), o)))
            else {
                log::warn!(
                    "scan {}: relation {s} -> {o} references a missing object, skipped",
                    scan.scan
                );
                continue;
            };
            if subject == object {
                log::warn!("scan {}: self relation on {s} skipped", scan.scan);
                continue;
            }
            if !known_predicates.contains(name.as_str()) {
                log::warn!("scan {}: predicate {name:?} is not built in, admitting it", scan.scan);
            }
            if !predicates.contains(name) {
                predicates.push(name.clone());
            }
            let edge = RelationEdge::new(subject, name.clone(), object)?;
            if graph.contains_edge(&edge.key()) {
                log::warn!("scan {}: duplicate relation {s} {name} {o} skipped", scan.scan);
                continue;
            }
            graph.insert_edge(edge)?;
        }
    }

    let world = GroundTruthWorld {
        rooms,
        graph,
        vocab: Vocabulary { labels, predicates },
        dynamics: None,
    };
    world.validate()?;
    Ok(world)
}
