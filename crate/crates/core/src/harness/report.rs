use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Scenario, ScenarioConfig};
use crate::alignment::AlignmentReport;
use crate::error::{Error, Result};
use crate::graph::{AgentId, InstanceId, RoomId};
use crate::metrics::{EvalResult, TaskScores, TimingSummary};

/// One merge of one transmitted query graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub agent: AgentId,
    pub t: u64,
    pub room: RoomId,
    pub query_nodes: usize,
    pub query_edges: usize,
    pub bytes: u64,
    pub alignment: AlignmentReport,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionTally {
    pub merged: usize,
    pub appended: usize,
    pub appended_nodes: usize,
    pub matching_node: usize,
    pub conflicting_label: usize,
    pub new_node: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub pass: u32,
    pub agent: AgentId,
    pub rooms: Vec<RoomId>,
    pub overlap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSize {
    pub nodes: usize,
    pub edges: usize,
}

/// A reference node that no longer corresponds to a current ground-truth
/// instance (unmatched or mislabeled under provenance matching).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FalsePositiveNode {
    pub id: InstanceId,
    pub gt: Option<InstanceId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovedObject {
    pub gt: InstanceId,
    pub fp_nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsRecord {
    pub moved: Vec<InstanceId>,
    pub removed: Vec<RemovedObject>,
    pub changed: Vec<InstanceId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficRecord {
    pub total_bytes: u64,
    pub per_agent_bytes: BTreeMap<AgentId, u64>,
    pub total_mb: f64,
    pub per_agent_mb: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskMetric {
    pub r: f64,
    pub p: f64,
    pub f1: f64,
}

impl From<EvalResult> for TaskMetric {
    fn from(e: EvalResult) -> Self {
        Self {
            r: e.recall,
            p: e.precision,
            f1: e.f1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UngatedMetrics {
    pub triplet: TaskMetric,
    pub object: TaskMetric,
    pub predicate: TaskMetric,
}

/// Headline numbers of one run: gated scores at the top level, the
/// provenance-matched scores under `ungated`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: Scenario,
    pub domain_size: usize,
    pub k_agents: usize,
    pub overlap: f64,
    pub triplet: TaskMetric,
    pub object: TaskMetric,
    pub predicate: TaskMetric,
    pub ungated: UngatedMetrics,
    /// Mean per agent, 1 MB = 10^6 bytes.
    pub traffic_mb: f64,
    pub align_seconds: f64,
    pub total_minutes: f64,
    pub seed: u64,
}

impl MetricsReport {
    pub fn new(
        config: &ScenarioConfig,
        domain_size: usize,
        gated: &TaskScores,
        ungated: &TaskScores,
        traffic_mb: f64,
        timing: &TimingSummary,
    ) -> Self {
        Self {
            scenario: config.scenario,
            domain_size,
            k_agents: config.k_agents,
            overlap: config.overlap_ratio,
            triplet: gated.triplet.into(),
            object: gated.object.into(),
            predicate: gated.predicate.into(),
            ungated: UngatedMetrics {
                triplet: ungated.triplet.into(),
                object: ungated.object.into(),
                predicate: ungated.predicate.into(),
            },
            traffic_mb,
            align_seconds: timing.total_align_seconds,
            total_minutes: timing.total_minutes,
            seed: config.seed,
        }
    }

    pub fn csv_row(&self) -> CsvRow {
        CsvRow {
            scenario: self.scenario.to_string(),
            domain_size: self.domain_size,
            k_agents: self.k_agents,
            overlap: self.overlap,
            triplet_r: self.triplet.r,
            triplet_p: self.triplet.p,
            triplet_f1: self.triplet.f1,
            object_r: self.object.r,
            object_p: self.object.p,
            object_f1: self.object.f1,
            predicate_r: self.predicate.r,
            predicate_p: self.predicate.p,
            predicate_f1: self.predicate.f1,
            traffic_mb: self.traffic_mb,
            align_seconds: self.align_seconds,
            total_minutes: self.total_minutes,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scenario: String,
    pub domain_size: usize,
    pub k_agents: usize,
    pub overlap: f64,
    pub triplet_r: f64,
    pub triplet_p: f64,
    pub triplet_f1: f64,
    pub object_r: f64,
    pub object_p: f64,
    pub object_f1: f64,
    pub predicate_r: f64,
    pub predicate_p: f64,
    pub predicate_f1: f64,
    pub traffic_mb: f64,
    pub align_seconds: f64,
    pub total_minutes: f64,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "scenario,domain_size,k_agents,overlap,triplet_r,triplet_p,triplet_f1,object_r,object_p,object_f1,predicate_r,predicate_p,predicate_f1,traffic_mb,align_seconds,total_minutes,seed";

/// Everything recorded about a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub world: GraphSize,
    pub world_final: GraphSize,
    pub merged_graph: GraphSize,
    pub trajectories: Vec<TrajectoryRecord>,
    pub merges: Vec<MergeRecord>,
    pub tally: DecisionTally,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsRecord>,
    pub gated: TaskScores,
    pub ungated: TaskScores,
    pub false_positive_nodes: Vec<FalsePositiveNode>,
    pub traffic: TrafficRecord,
    pub timing: TimingSummary,
    pub metrics: MetricsReport,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[MetricsReport]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.serialize(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct WithMetrics {
    metrics: MetricsReport,
}

/// Reads either a run report or a bare metrics file.
pub fn read_metrics(path: impl AsRef<Path>) -> Result<MetricsReport> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)?;
    let parsed = if value.get("metrics").is_some() {
        serde_json::from_value::<WithMetrics>(value).map(|w| w.metrics)
    } else {
        serde_json::from_value::<MetricsReport>(value)
    };
    parsed.map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))
}
