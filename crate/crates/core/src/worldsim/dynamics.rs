use std::collections::BTreeSet;

use rand::seq::{index, IndexedRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::world::{proximity_pairs_for, random_edge, GroundTruthWorld};
use crate::error::{Error, Result};
use crate::geometry::{quantize, quantize3, Aabb, Vec3};
use crate::graph::{EntityNode, InstanceId};

/// Rigid translation of one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Move {
    pub id: InstanceId,
    pub translation: Vec3,
}

/// Changes between the first exploration pass and the rescan.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DynamicsSchedule {
    pub moved: Vec<Move>,
    pub removed: Vec<InstanceId>,
    /// New label per instance.
    pub changed: Vec<(InstanceId, String)>,
    /// Instances that only exist after the change. Usually empty.
    pub appeared: Vec<EntityNode>,
}

impl DynamicsSchedule {
    pub fn is_empty(&self) -> bool {
        self.moved.is_empty() && self.removed.is_empty() && self.changed.is_empty() && self.appeared.is_empty()
    }

    /// Checks that the lists are disjoint and reference existing instances.
    pub fn validate(&self, world: &GroundTruthWorld) -> Result<()> {
        let mut seen = BTreeSet::new();
        let ids = self
            .moved
            .iter()
            .map(|m| m.id)
            .chain(self.removed.iter().copied())
            .chain(self.changed.iter().map(|c| c.0));
        for id in ids {
            if !world.graph.contains_node(id) {
                return Err(Error::Schedule(format!("{id} does not exist")));
            }
            if !seen.insert(id) {
                return Err(Error::Schedule(format!("{id} appears in more than one list")));
            }
        }
        for n in &self.appeared {
            if world.graph.contains_node(n.id()) || !seen.insert(n.id()) {
                return Err(Error::Schedule(format!(
                    "appeared {} collides with an existing id",
                    n.id()
                )));
            }
        }
        Ok(())
    }
}

/// Counts of each change kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsCounts {
    pub moved: usize,
    pub removed: usize,
    pub changed: usize,
}

/// Fractions of all instances that move, disappear or change label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsProportions {
    pub moved: f64,
    pub removed: f64,
    pub changed: f64,
}

impl Default for DynamicsProportions {
    /// 214 moved, 70 removed and 194 changed out of 1588 instances.
    fn default() -> Self {
        Self {
            moved: 214.0 / 1588.0,
            removed: 70.0 / 1588.0,
            changed: 194.0 / 1588.0,
        }
    }
}

impl DynamicsProportions {
    pub fn validate(&self) -> Result<()> {
        let all = [self.moved, self.removed, self.changed];
        if all.iter().any(|p| !(0.0..=1.0).contains(p)) || all.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(Error::Config(
                "dynamics proportions must lie in [0, 1] and sum to at most 1".into(),
            ));
        }
        Ok(())
    }

    pub fn counts_for(&self, n_instances: usize) -> DynamicsCounts {
        let n = n_instances as f64;
        DynamicsCounts {
            moved: (self.moved * n).round() as usize,
            removed: (self.removed * n).round() as usize,
            changed: (self.changed * n).round() as usize,
        }
    }
}

const PLACEMENT_ATTEMPTS: usize = 2000;

/// Draws disjoint sets of instances to move, remove and relabel. Moved
/// instances get a translation to a free spot inside their room; changed
/// instances get a different label from the vocabulary.
pub fn sample_schedule<R: Rng + ?Sized>(
    world: &GroundTruthWorld,
    counts: DynamicsCounts,
    rng: &mut R,
) -> Result<DynamicsSchedule> {
    let ids: Vec<InstanceId> = world.graph.node_ids().collect();
    let total = counts.moved + counts.removed + counts.changed;
    if total > ids.len() {
        return Err(Error::Schedule(format!(
            "{total} scheduled changes exceed {} instances",
            ids.len()
        )));
    }
    let picked: Vec<InstanceId> = index::sample(rng, ids.len(), total)
        .into_iter()
        .map(|i| ids[i])
        .collect();
    let (moved_ids, rest) = picked.split_at(counts.moved);
    let (removed_ids, changed_ids) = rest.split_at(counts.removed);

    let mut occupied: Vec<Aabb> = world.graph.nodes().map(|n| *n.bbox()).collect();
    let mut moved = Vec::with_capacity(moved_ids.len());
    for &id in moved_ids {
        let node = world.graph.node(id).expect("sampled id exists");
        let room = world
            .room(node.provenance().room)
            .ok_or_else(|| Error::Schedule(format!("{id} has no room")))?;
        let target = find_free_spot(node.bbox(), &room.bounds, &occupied, rng)
            .ok_or_else(|| Error::Schedule(format!("no free spot to move {id} inside {}", room.id)))?;
        let translation = quantize3([0, 1, 2].map(|i| target.min()[i] - node.bbox().min()[i]));
        occupied.push(node.bbox().translated(translation).quantized());
        moved.push(Move { id, translation });
    }

    let mut changed = Vec::with_capacity(changed_ids.len());
    for &id in changed_ids {
        let current = world.graph.node(id).expect("sampled id exists").label();
        let options: Vec<&String> = world.vocab.labels.iter().filter(|l| l.as_str() != current).collect();
        let label = options
            .choose(rng)
            .ok_or_else(|| Error::Schedule("label vocabulary has no alternative labels".into()))?;
        changed.push((id, (*label).clone()));
    }

    Ok(DynamicsSchedule {
        moved,
        removed: removed_ids.to_vec(),
        changed,
        appeared: Vec::new(),
    })
}

/// Rejection-samples a placement of `b`'s size inside `room` that touches
/// none of `occupied` (which includes `b` itself).
fn find_free_spot<R: Rng + ?Sized>(b: &Aabb, room: &Aabb, occupied: &[Aabb], rng: &mut R) -> Option<Aabb> {
    let size = b.extents();
    if (0..3).any(|i| size[i] > room.extents()[i]) {
        return None;
    }
    for _ in 0..PLACEMENT_ATTEMPTS {
        let mut min = [0.0; 3];
        for i in 0..3 {
            let span = room.extents()[i] - size[i];
            let off = if span > 0.0 { rng.random_range(0.0..span) } else { 0.0 };
            min[i] = quantize(room.min()[i] + off);
        }
        let max = [0, 1, 2].map(|i| quantize(min[i] + size[i]));
        let Ok(cand) = Aabb::new(min, max) else { continue };
        if room.contains(&cand) && occupied.iter().all(|o| !o.intersects(&cand)) {
            return Some(cand);
        }
    }
    None
}

/// Returns the rescan-state world. Removed instances lose their incident
/// relations; moved instances keep their id and degree but their relations
/// are re-derived from their new neighbourhood.
pub fn apply_dynamics<R: Rng + ?Sized>(
    world: &GroundTruthWorld,
    schedule: &DynamicsSchedule,
    rng: &mut R,
) -> Result<GroundTruthWorld> {
    schedule.validate(world)?;
    let mut next = world.clone();
    next.dynamics = None;
    let g = &mut next.graph;

    for &id in &schedule.removed {
        g.remove_node(id)?;
    }
    for (id, label) in &schedule.changed {
        g.node_mut(*id)
            .expect("validated")
            .set_ranking(vec![(label.clone(), 1.0)]);
    }

    let mut degrees = Vec::with_capacity(schedule.moved.len());
    for m in &schedule.moved {
        let node = g.node(m.id).expect("validated");
        let room = world.room(node.provenance().room).expect("room of a validated node");
        let bbox = node.bbox().translated(m.translation).quantized();
        let centroid = quantize3([0, 1, 2].map(|i| node.centroid()[i] + m.translation[i]));
        if !room.bounds.contains(&bbox) {
            return Err(Error::Schedule(format!("move of {} leaves {}", m.id, room.id)));
        }
        degrees.push(g.degree(m.id));
        g.node_mut(m.id).expect("validated").set_geometry(centroid, bbox);
        let incident: Vec<_> = g
            .edges()
            .filter(|e| e.subject() == m.id || e.object() == m.id)
            .map(|e| e.key())
            .collect();
        for k in incident {
            g.remove_edge(&k);
        }
    }
    for (m, deg) in schedule.moved.iter().zip(degrees) {
        let room = g.node(m.id).expect("validated").provenance().room;
        let others: Vec<(InstanceId, Vec3)> = g
            .nodes()
            .filter(|n| n.provenance().room == room && n.id() != m.id && !g.are_adjacent(n.id(), m.id))
            .map(|n| (n.id(), n.centroid()))
            .collect();
        let here = g.node(m.id).expect("validated").centroid();
        for other in proximity_pairs_for(here, &others, deg.max(1)) {
            g.insert_edge(random_edge(m.id, other, &next.vocab.predicates, rng)?)?;
        }
    }
    for n in &schedule.appeared {
        g.insert_node(n.clone())?;
    }
    next.validate()?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::world::{generate_world, WorldParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn world(rooms: usize, seed: u64) -> GroundTruthWorld {
        generate_world(
            &WorldParams::full_scale().with_rooms(rooms),
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn empty_schedule_leaves_world_unchanged() {
        let w = world(2, 1);
        let after = apply_dynamics(&w, &DynamicsSchedule::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(after, w);
    }

    #[test]
    fn removal_drops_incident_edges() {
        let w = world(2, 4);
        let id = w
            .graph
            .node_ids()
            .find(|&id| w.graph.degree(id) == 3)
            .expect("a degree-3 node");
        let s = DynamicsSchedule {
            removed: vec![id],
            ..Default::default()
        };
        let after = apply_dynamics(&w, &s, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(after.graph.node_count(), w.graph.node_count() - 1);
        assert_eq!(after.graph.edge_count(), w.graph.edge_count() - 3);
    }

    #[test]
    fn overlapping_lists_are_rejected() {
        let w = world(1, 2);
        let s = DynamicsSchedule {
            removed: vec![InstanceId(0)],
            changed: vec![(InstanceId(0), "sofa".into())],
            ..Default::default()
        };
        assert!(matches!(
            apply_dynamics(&w, &s, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::Schedule(_))
        ));
    }

    #[test]
    fn moves_stay_in_room_and_keep_ids() {
        let w = world(3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = sample_schedule(
            &w,
            DynamicsCounts {
                moved: 10,
                removed: 4,
                changed: 6,
            },
            &mut rng,
        )
        .unwrap();
        s.validate(&w).unwrap();
        let after = apply_dynamics(&w, &s, &mut rng).unwrap();
        assert_eq!(after.graph.node_count(), w.graph.node_count() - 4);
        for m in &s.moved {
            let before = w.graph.node(m.id).unwrap();
            let now = after.graph.node(m.id).unwrap();
            assert_eq!(now.label(), before.label());
            assert!(!now.bbox().intersects(before.bbox()));
            for i in 0..3 {
                assert!((now.centroid()[i] - before.centroid()[i] - m.translation[i]).abs() < 1e-6);
            }
        }
        for (id, label) in &s.changed {
            assert_eq!(after.graph.node(*id).unwrap().label(), label);
            assert_ne!(w.graph.node(*id).unwrap().label(), label);
        }
    }

    #[test]
    fn default_proportions_reach_rescan_magnitudes() {
        let w = world(47, 2024);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let counts = DynamicsProportions::default().counts_for(w.graph.node_count());
        let s = sample_schedule(&w, counts, &mut rng).unwrap();
        let after = apply_dynamics(&w, &s, &mut rng).unwrap();
        let nodes = after.graph.node_count() as f64;
        let edges = after.graph.edge_count() as f64;
        assert!((nodes - 1518.0).abs() <= 0.05 * 1518.0, "{nodes}");
        assert!((edges - 5054.0).abs() <= 0.10 * 5054.0, "{edges}");
    }
}
