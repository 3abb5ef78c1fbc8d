use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::world::GroundTruthWorld;
use crate::error::{Error, Result};
use crate::geometry::{quantize, quantize3, Aabb};
use crate::graph::{AgentId, EntityNode, Provenance, Ranking, RelationEdge, RoomId, SceneGraph};

/// Length of noisy label and predicate rankings.
pub const RANKING_DEPTH: usize = 5;

/// Smallest box extent kept after face jitter, in meters.
const MIN_EXTENT: f64 = 0.01;

/// Perception error model standing in for a learned scene-graph front end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationNoise {
    pub label_flip_prob: f64,
    pub centroid_jitter_sigma: f64,
    pub bbox_jitter_sigma: f64,
    pub node_dropout_prob: f64,
    pub edge_dropout_prob: f64,
    pub predicate_flip_prob: f64,
}

impl Default for ObservationNoise {
    fn default() -> Self {
        Self {
            label_flip_prob: 0.25,
            centroid_jitter_sigma: 0.10,
            bbox_jitter_sigma: 0.05,
            node_dropout_prob: 0.10,
            edge_dropout_prob: 0.15,
            predicate_flip_prob: 0.25,
        }
    }
}

impl ObservationNoise {
    pub fn none() -> Self {
        Self {
            label_flip_prob: 0.0,
            centroid_jitter_sigma: 0.0,
            bbox_jitter_sigma: 0.0,
            node_dropout_prob: 0.0,
            edge_dropout_prob: 0.0,
            predicate_flip_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("label_flip_prob", self.label_flip_prob),
            ("node_dropout_prob", self.node_dropout_prob),
            ("edge_dropout_prob", self.edge_dropout_prob),
            ("predicate_flip_prob", self.predicate_flip_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        for (name, s) in [
            ("centroid_jitter_sigma", self.centroid_jitter_sigma),
            ("bbox_jitter_sigma", self.bbox_jitter_sigma),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("{name} = {s} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Builds a score-sorted ranking. The reported label comes first; when it
/// is wrong the true label follows it. Remaining slots hold other
/// vocabulary entries.
fn noisy_ranking<R: Rng + ?Sized>(truth: &str, flip: bool, vocab: &[String], rng: &mut R) -> Ranking {
    let mut names: Vec<String> = Vec::with_capacity(RANKING_DEPTH);
    let others: Vec<&String> = vocab.iter().filter(|v| v.as_str() != truth).collect();
    if flip && !others.is_empty() {
        names.push((*others.choose(rng).unwrap()).clone());
    }
    names.push(truth.to_owned());
    let remaining: Vec<&&String> = others.iter().filter(|v| !names.contains(v)).collect();
    let fill = RANKING_DEPTH.saturating_sub(names.len()).min(remaining.len());
    for v in remaining.choose_multiple(rng, fill) {
        names.push((**v).clone());
    }
    let mut scores: Vec<f64> = (0..names.len()).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = scores.iter().sum();
    scores.iter_mut().for_each(|s| *s = quantize(*s / total));
    scores.sort_by(|a, b| b.total_cmp(a));
    names.into_iter().zip(scores).collect()
}

fn jitter<R: Rng + ?Sized>(x: f64, sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return x;
    }
    x + Normal::new(0.0, sigma).expect("validated sigma").sample(rng)
}

/// One agent's scene graph of one room at logical time `t`.
///
/// Instances keep their ground-truth ids and record them in provenance.
pub fn observe<R: Rng + ?Sized>(
    world: &GroundTruthWorld,
    room: RoomId,
    noise: &ObservationNoise,
    agent: AgentId,
    t: u64,
    rng: &mut R,
) -> Result<SceneGraph> {
    noise.validate()?;
    if world.room(room).is_none() {
        return Err(Error::InvalidData(format!("unknown {room}")));
    }
    let truth = world.room_graph(room);
    let mut g = SceneGraph::new(format!("agent{}/room{}/t{}", agent.0, room.0, t));
    let labels = &world.vocab.labels;
    let predicates = &world.vocab.predicates;

    for n in truth.nodes() {
        if noise.node_dropout_prob > 0.0 && rng.random_bool(noise.node_dropout_prob) {
            continue;
        }
        let ranking = if noise.label_flip_prob > 0.0 {
            let flip = rng.random_bool(noise.label_flip_prob);
            noisy_ranking(n.label(), flip, labels, rng)
        } else {
            n.label_ranking().clone()
        };
        let (min, max) = (n.bbox().min(), n.bbox().max());
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for i in 0..3 {
            let a = quantize(jitter(min[i], noise.bbox_jitter_sigma, rng));
            let b = quantize(jitter(max[i], noise.bbox_jitter_sigma, rng));
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            lo[i] = a;
            hi[i] = if b - a < MIN_EXTENT {
                quantize(a + MIN_EXTENT)
            } else {
                b
            };
        }
        let bbox = Aabb::new(lo, hi)?;
        let c = n.centroid();
        let centroid = quantize3(bbox.clamp_point([0, 1, 2].map(|i| jitter(c[i], noise.centroid_jitter_sigma, rng))));
        let node = EntityNode::with_ranking(n.id(), ranking, centroid, bbox)?
            .with_stddev(n.stddev())?
            .with_provenance(Provenance {
                agent,
                room,
                t,
                gt: Some(n.provenance().gt.unwrap_or(n.id())),
            });
        g.insert_node(node)?;
    }

    for e in truth.edges() {
        if !g.contains_node(e.subject()) || !g.contains_node(e.object()) {
            continue;
        }
        if noise.edge_dropout_prob > 0.0 && rng.random_bool(noise.edge_dropout_prob) {
            continue;
        }
        let ranking = if noise.predicate_flip_prob > 0.0 {
            let flip = rng.random_bool(noise.predicate_flip_prob);
            noisy_ranking(e.predicate(), flip, predicates, rng)
        } else {
            e.predicate_ranking().clone()
        };
        let edge = RelationEdge::with_ranking(e.subject(), ranking, e.object())?;
        // a flip can collide with another true relation on the same pair
        if !g.contains_edge(&edge.key()) {
            g.insert_edge(edge)?;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldsim::world::{generate_world, WorldParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn world() -> GroundTruthWorld {
        generate_world(
            &WorldParams::full_scale().with_rooms(2),
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap()
    }

    #[test]
    fn zero_noise_is_the_room_subgraph() {
        let w = world();
        let g = observe(
            &w,
            RoomId(1),
            &ObservationNoise::none(),
            AgentId(1),
            0,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert!(g.same_content(&w.room_graph(RoomId(1))));
        assert!(g
            .nodes()
            .all(|n| n.provenance().agent == AgentId(1) && n.provenance().gt == Some(n.id())));
    }

    #[test]
    fn full_dropout_is_empty() {
        let noise = ObservationNoise {
            node_dropout_prob: 1.0,
            ..ObservationNoise::none()
        };
        let g = observe(
            &world(),
            RoomId(0),
            &noise,
            AgentId(1),
            0,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn label_flip_frequency() {
        let w = world();
        let noise = ObservationNoise {
            label_flip_prob: 0.3,
            ..ObservationNoise::none()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (mut seen, mut flipped) = (0usize, 0usize);
        let mut t = 0;
        while seen < 10_000 {
            let g = observe(&w, RoomId((t % 2) as u32), &noise, AgentId(1), t, &mut rng).unwrap();
            for n in g.nodes() {
                let truth = w.graph.node(n.id()).unwrap().label();
                seen += 1;
                if n.label() != truth {
                    flipped += 1;
                    assert_eq!(n.label_ranking()[1].0, truth);
                }
                assert!(n.label_in_top_k(truth, 2));
                assert_eq!(n.label_ranking().len(), RANKING_DEPTH);
            }
            t += 1;
        }
        let frac = flipped as f64 / seen as f64;
        assert!((frac - 0.3).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn default_noise_keeps_graph_valid() {
        let w = world();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in 0..20 {
            let g = observe(&w, RoomId(0), &ObservationNoise::default(), AgentId(2), t, &mut rng).unwrap();
            g.check_invariants().unwrap();
            assert!(g.node_count() <= w.room_graph(RoomId(0)).node_count());
        }
    }

    #[test]
    fn invalid_noise_is_rejected() {
        let bad = ObservationNoise {
            label_flip_prob: 1.5,
            ..ObservationNoise::none()
        };
        assert!(bad.validate().is_err());
        let bad = ObservationNoise {
            bbox_jitter_sigma: -0.1,
            ..ObservationNoise::none()
        };
        assert!(bad.validate().is_err());
    }
}
