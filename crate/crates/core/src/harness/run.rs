use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Scenario, ScenarioConfig, TrafficMode};
use super::report::{
    write_csv, DecisionTally, DynamicsRecord, FalsePositiveNode, GraphSize, MergeRecord, MetricsReport, RemovedObject,
    RunReport, TrafficRecord, TrajectoryRecord,
};
use crate::alignment::{merge_into, Branch, Thresholds};
use crate::codec::{message_bytes, write_graph};
use crate::error::{Error, Result};
use crate::graph::{AgentId, RoomId, SceneGraph};
use crate::metrics::{evaluate, match_instances, timing_summary, traffic_summary, MatchSpec, TrafficEntry, TrafficLog};
use crate::update::MatchKind;
use crate::worldsim::{
    apply_dynamics, generate_world, measure_overlap, observe, plan_trajectories, read_world, sample_schedule,
    write_world, AgentTrajectory, DynamicsSchedule, GroundTruthWorld,
};

/// Random stream tags; every consumer of randomness draws from its own
/// stream so that changing one stage does not shift the others.
pub mod stream {
    pub const WORLD: u64 = 1;
    pub const TRAJECTORIES: u64 = 2;
    pub const OBSERVATION: u64 = 3;
    pub const ALIGNMENT: u64 = 4;
    pub const DYNAMICS: u64 = 5;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Deterministic generator for `seed` and a path of stream tags.
pub fn stream_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut s = splitmix64(seed);
    for &t in tags {
        s = splitmix64(s ^ splitmix64(t.wrapping_add(0x5851_f42d_4c95_7f2d)));
    }
    ChaCha8Rng::seed_from_u64(s)
}

/// A query graph in transit to the shared reference graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub agent: AgentId,
    /// Logical send time.
    pub t: u64,
    pub room: RoomId,
    pub graph: SceneGraph,
    /// Payload size including any synthetic point data.
    pub bytes: u64,
}

/// Merges messages into `reference` one at a time, in timestamp order with
/// ties broken by agent id.
pub fn merge_loop<R: Rng + ?Sized>(
    messages: &[Message],
    mut reference: SceneGraph,
    th: &Thresholds,
    max_anchors: usize,
    rng: &mut R,
) -> Result<(SceneGraph, Vec<MergeRecord>)> {
    let mut order: Vec<&Message> = messages.iter().collect();
    order.sort_by_key(|m| (m.t, m.agent));
    let mut records = Vec::with_capacity(order.len());
    for m in order {
        let (next, alignment) = merge_into(&m.graph, reference, th, max_anchors, rng)?;
        next.check_invariants()?;
        reference = next;
        records.push(MergeRecord {
            agent: m.agent,
            t: m.t,
            room: m.room,
            query_nodes: m.graph.node_count(),
            query_edges: m.graph.edge_count(),
            bytes: m.bytes,
            alignment,
        });
    }
    Ok((reference, records))
}

/// Outputs of one scenario run.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub world: GroundTruthWorld,
    pub world_final: GroundTruthWorld,
    pub merged: SceneGraph,
    pub report: RunReport,
}

impl RunArtifacts {
    /// Writes world, final world, merged graph, run report, metrics and
    /// CSV files into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_world(dir.join("world.json"), &self.world)?;
        write_world(dir.join("world_final.json"), &self.world_final)?;
        write_graph(dir.join("merged_graph.json"), &self.merged)?;
        std::fs::write(dir.join("run_report.json"), self.report.to_json())?;
        std::fs::write(
            dir.join("metrics.json"),
            serde_json::to_string_pretty(&self.report.metrics).expect("metrics serialize"),
        )?;
        write_csv(
            std::fs::File::create(dir.join("results.csv"))?,
            std::slice::from_ref(&self.report.metrics),
        )?;
        Ok(())
    }
}

fn payload_bytes(g: &SceneGraph, cfg: &ScenarioConfig) -> u64 {
    let graph = message_bytes(g) as u64;
    match cfg.traffic_mode {
        TrafficMode::GraphsOnly => graph,
        TrafficMode::GraphsPlusPoints => graph + g.node_count() as u64 * cfg.points_per_instance * cfg.bytes_per_point,
    }
}

fn exploration_pass(
    world: &GroundTruthWorld,
    trajectories: &[AgentTrajectory],
    pass: u32,
    t0: u64,
    cfg: &ScenarioConfig,
) -> Result<Vec<Message>> {
    let mut out = Vec::new();
    for tr in trajectories {
        for (i, &room) in tr.rooms.iter().enumerate() {
            let t = t0 + i as u64;
            let mut rng = stream_rng(
                cfg.seed,
                &[stream::OBSERVATION, pass as u64, tr.agent.0 as u64, room.0 as u64],
            );
            let graph = observe(world, room, &cfg.noise, tr.agent, t, &mut rng)?;
            let bytes = payload_bytes(&graph, cfg);
            out.push(Message {
                agent: tr.agent,
                t,
                room,
                graph,
                bytes,
            });
        }
    }
    Ok(out)
}

fn plan(world: &GroundTruthWorld, cfg: &ScenarioConfig, pass: u32) -> Result<Vec<AgentTrajectory>> {
    let mut rng = stream_rng(cfg.seed, &[stream::TRAJECTORIES, pass as u64]);
    plan_trajectories(
        &world.room_ids(),
        cfg.k_agents,
        cfg.overlap_ratio,
        cfg.strict_overlap,
        &mut rng,
    )
}

fn size(g: &SceneGraph) -> GraphSize {
    GraphSize {
        nodes: g.node_count(),
        edges: g.edge_count(),
    }
}

/// Generates (or loads) the world named by `cfg` and runs its scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let world = match &cfg.world_file {
        Some(path) => read_world(path)?,
        None => generate_world(&cfg.world_params(), &mut stream_rng(cfg.seed, &[stream::WORLD]))?,
    };
    let schedule = match cfg.scenario {
        Scenario::Scp => None,
        Scenario::Ldcp => Some(match &world.dynamics {
            Some(s) => s.clone(),
            None => {
                let counts = cfg
                    .dynamics_counts
                    .unwrap_or_else(|| cfg.dynamics.counts_for(world.graph.node_count()));
                sample_schedule(&world, counts, &mut stream_rng(cfg.seed, &[stream::DYNAMICS, 0]))?
            }
        }),
    };
    run_with_world(cfg, world, schedule)
}

pub fn run_scp(cfg: &ScenarioConfig) -> Result<RunArtifacts> {
    if cfg.scenario != Scenario::Scp {
        return Err(Error::Config("run_scp needs scenario SCP".into()));
    }
    run_scenario(cfg)
}

pub fn run_ldcp(cfg: &ScenarioConfig) -> Result<RunArtifacts> {
    if cfg.scenario != Scenario::Ldcp {
        return Err(Error::Config("run_ldcp needs scenario LDCP".into()));
    }
    run_scenario(cfg)
}

/// Runs on a given world. With a schedule, a second exploration pass over
/// the changed world follows the first one and merges into the same
/// reference graph.
pub fn run_with_world(
    cfg: &ScenarioConfig,
    mut world: GroundTruthWorld,
    schedule: Option<DynamicsSchedule>,
) -> Result<RunArtifacts> {
    cfg.validate()?;
    let start = Instant::now();
    world.validate()?;
    world.dynamics = schedule.clone();

    let mut trajectory_records = Vec::new();
    let mut record_pass = |pass: u32, trs: &[AgentTrajectory]| {
        for (tr, overlap) in trs.iter().zip(measure_overlap(trs)) {
            trajectory_records.push(TrajectoryRecord {
                pass,
                agent: tr.agent,
                rooms: tr.rooms.clone(),
                overlap,
            });
        }
    };

    let first = plan(&world, cfg, 1)?;
    record_pass(1, &first);
    let mut messages = exploration_pass(&world, &first, 1, 0, cfg)?;
    let mut align_rng = stream_rng(cfg.seed, &[stream::ALIGNMENT]);
    let (mut merged, mut merges) = merge_loop(
        &messages,
        SceneGraph::new("world"),
        &cfg.thresholds,
        cfg.max_anchors,
        &mut align_rng,
    )?;

    let mut world_final = world.clone();
    let mut dynamics = None;
    if let Some(schedule) = &schedule {
        world_final = apply_dynamics(&world, schedule, &mut stream_rng(cfg.seed, &[stream::DYNAMICS, 1]))?;
        let second = plan(&world_final, cfg, 2)?;
        record_pass(2, &second);
        let t0 = first.iter().map(|t| t.rooms.len() as u64).max().unwrap_or(0);
        let rescans = exploration_pass(&world_final, &second, 2, t0, cfg)?;
        let (m, more) = merge_loop(&rescans, merged, &cfg.thresholds, cfg.max_anchors, &mut align_rng)?;
        merged = m;
        merges.extend(more);
        messages.extend(rescans);
        dynamics = Some(schedule);
    }

    let mut log = TrafficLog::default();
    for m in &messages {
        log.record(TrafficEntry {
            sender: m.agent,
            receiver: None,
            bytes: m.bytes,
            t: m.t,
        });
    }

    let gt = &world_final.graph;
    let gated = evaluate(&merged, gt, &cfg.eval);
    let ungated_spec = MatchSpec::ungated(cfg.eval.k);
    let ungated = evaluate(&merged, gt, &ungated_spec);
    let matching = match_instances(&merged, gt, &ungated_spec);
    let false_positive_nodes: Vec<FalsePositiveNode> = merged
        .nodes()
        .filter(|n| {
            !matching
                .get(&n.id())
                .and_then(|g| gt.node(*g))
                .is_some_and(|g| n.label_in_top_k(g.label(), cfg.eval.k))
        })
        .map(|n| FalsePositiveNode {
            id: n.id(),
            gt: n.provenance().gt,
        })
        .collect();

    let dynamics = dynamics.map(|s| DynamicsRecord {
        moved: s.moved.iter().map(|m| m.id).collect(),
        removed: s
            .removed
            .iter()
            .map(|&id| RemovedObject {
                gt: id,
                fp_nodes: false_positive_nodes.iter().filter(|f| f.gt == Some(id)).count(),
            })
            .collect(),
        changed: s.changed.iter().map(|c| c.0).collect(),
    });

    let mut tally = DecisionTally::default();
    for m in &mut merges {
        if !cfg.record_timings {
            m.alignment.align_seconds = 0.0;
        }
        match m.alignment.branch {
            Branch::Merged => tally.merged += 1,
            Branch::Appended => {
                tally.appended += 1;
                tally.appended_nodes += m.query_nodes;
            }
        }
        for d in &m.alignment.decisions {
            match d.kind {
                MatchKind::MatchingNode => tally.matching_node += 1,
                MatchKind::ConflictingLabel => tally.conflicting_label += 1,
                MatchKind::NewNode => tally.new_node += 1,
            }
        }
    }
    let alignments: Vec<_> = merges.iter().map(|m| m.alignment.clone()).collect();
    let wall = if cfg.record_timings {
        start.elapsed()
    } else {
        Duration::ZERO
    };
    let timing = timing_summary(&alignments, wall);
    let traffic = traffic_summary(&log, cfg.k_agents);
    let metrics = MetricsReport::new(cfg, world.rooms.len(), &gated, &ungated, traffic.per_agent_mb, &timing);

    let report = RunReport {
        config: cfg.clone(),
        world: size(&world.graph),
        world_final: size(gt),
        merged_graph: size(&merged),
        trajectories: trajectory_records,
        merges,
        tally,
        dynamics,
        gated,
        ungated,
        false_positive_nodes,
        traffic: TrafficRecord {
            total_bytes: log.total_bytes(),
            per_agent_bytes: log.per_agent_bytes(),
            total_mb: traffic.total_mb,
            per_agent_mb: traffic.per_agent_mb,
        },
        timing,
        metrics,
    };
    Ok(RunArtifacts {
        world,
        world_final,
        merged,
        report,
    })
}

/// Rooms covered by a set of trajectories.
pub fn covered_rooms(trajectories: &[AgentTrajectory]) -> BTreeSet<RoomId> {
    trajectories.iter().flat_map(|t| t.rooms.iter().copied()).collect()
}
