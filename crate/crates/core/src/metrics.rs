//! Recall, precision and F1 at rank k for objects, predicates and
//! triplets, plus traffic and timing summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentReport;
use crate::geometry::distance;
use crate::graph::{AgentId, EntityNode, InstanceId, RelationEdge, SceneGraph};

pub const BYTES_PER_MB: f64 = 1_000_000.0;

/// Geometric gate a prediction must pass to be matched to a ground-truth
/// instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialGate {
    pub iou_min: f64,
    pub dist_max: f64,
}

impl Default for SpatialGate {
    fn default() -> Self {
        Self {
            iou_min: 0.25,
            dist_max: 1.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchSpec {
    pub k: usize,
    /// `None` matches by the ground-truth ids stored in provenance.
    pub gate: Option<SpatialGate>,
}

impl Default for MatchSpec {
    fn default() -> Self {
        Self {
            k: 1,
            gate: Some(SpatialGate::default()),
        }
    }
}

impl MatchSpec {
    pub fn ungated(k: usize) -> Self {
        Self { k, gate: None }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.k < 1 {
            return Err(crate::Error::Config("rank cutoff k must be at least 1".into()));
        }
        if let Some(g) = self.gate {
            if !(g.iou_min > 0.0 && g.iou_min <= 1.0) {
                return Err(crate::Error::Config(format!("iou_min {} is outside (0, 1]", g.iou_min)));
            }
            if g.dist_max.is_nan() || g.dist_max < 0.0 {
                return Err(crate::Error::Config(format!("dist_max {} must be >= 0", g.dist_max)));
            }
        }
        Ok(())
    }
}

/// Scores for one task.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl EvalResult {
    /// A side with nothing to count (no ground truth, or no predictions)
    /// scores 1 when the other side is also clean and 0 otherwise.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let recall = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else if fp == 0 {
            1.0
        } else {
            0.0
        };
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else if fn_ == 0 {
            1.0
        } else {
            0.0
        };
        Self {
            recall,
            precision,
            f1: f1(recall, precision),
            tp,
            fp,
            fn_,
        }
    }
}

/// Harmonic mean of recall and precision, 0 when both are 0.
pub fn f1(recall: f64, precision: f64) -> f64 {
    if recall + precision > 0.0 {
        2.0 * recall * precision / (recall + precision)
    } else {
        0.0
    }
}

/// One-to-one assignment of predicted to ground-truth instances.
///
/// Gated: among pairs passing the gate, greedily take the highest IoU
/// first (then the shorter distance, then the smaller ids). Ungated: each
/// ground-truth id goes to the prediction that carries it in provenance,
/// preferring the latest observation and then the smaller id.
pub fn match_instances(pred: &SceneGraph, gt: &SceneGraph, spec: &MatchSpec) -> BTreeMap<InstanceId, InstanceId> {
    let mut out = BTreeMap::new();
    match spec.gate {
        Some(gate) => {
            let mut pairs: Vec<(f64, f64, InstanceId, InstanceId)> = Vec::new();
            for p in pred.nodes() {
                for g in gt.nodes() {
                    let d = distance(p.centroid(), g.centroid());
                    if d > gate.dist_max {
                        continue;
                    }
                    let iou = p.bbox().iou(g.bbox());
                    if iou >= gate.iou_min {
                        pairs.push((iou, d, p.id(), g.id()));
                    }
                }
            }
            pairs.sort_by(|a, b| {
                b.0.total_cmp(&a.0)
                    .then(a.1.total_cmp(&b.1))
                    .then(a.2.cmp(&b.2))
                    .then(a.3.cmp(&b.3))
            });
            let mut used = BTreeSet::new();
            for (_, _, p, g) in pairs {
                if !out.contains_key(&p) && !used.contains(&g) {
                    out.insert(p, g);
                    used.insert(g);
                }
            }
        }
        None => {
            let mut best: BTreeMap<InstanceId, &EntityNode> = BTreeMap::new();
            for p in pred.nodes() {
                let Some(g) = p.provenance().gt else { continue };
                if !gt.contains_node(g) {
                    continue;
                }
                let better = match best.get(&g) {
                    None => true,
                    Some(cur) => p.provenance().t > cur.provenance().t,
                };
                if better {
                    best.insert(g, p);
                }
            }
            out.extend(best.into_iter().map(|(g, p)| (p.id(), g)));
        }
    }
    out
}

pub fn eval_objects(pred: &SceneGraph, gt: &SceneGraph, spec: &MatchSpec) -> EvalResult {
    let m = match_instances(pred, gt, spec);
    eval_objects_with(pred, gt, &m, spec.k)
}

pub fn eval_objects_with(
    pred: &SceneGraph,
    gt: &SceneGraph,
    matching: &BTreeMap<InstanceId, InstanceId>,
    k: usize,
) -> EvalResult {
    let tp = pred
        .nodes()
        .filter(|p| {
            matching
                .get(&p.id())
                .and_then(|g| gt.node(*g))
                .is_some_and(|g| p.label_in_top_k(g.label(), k))
        })
        .count();
    EvalResult::from_counts(tp, pred.node_count() - tp, gt.node_count() - tp)
}

/// Counts relation hits over matched endpoint pairs. Within one directed
/// pair, ground-truth edges claim the first unclaimed prediction that
/// satisfies `hit`.
fn eval_edges(
    pred: &SceneGraph,
    gt: &SceneGraph,
    matching: &BTreeMap<InstanceId, InstanceId>,
    hit: impl Fn(&RelationEdge, &RelationEdge) -> bool,
) -> EvalResult {
    let mut by_pair: BTreeMap<(InstanceId, InstanceId), Vec<&RelationEdge>> = BTreeMap::new();
    for e in pred.edges() {
        if let (Some(&s), Some(&o)) = (matching.get(&e.subject()), matching.get(&e.object())) {
            by_pair.entry((s, o)).or_default().push(e);
        }
    }
    let mut tp = 0;
    for (pair, candidates) in &by_pair {
        let mut claimed = vec![false; candidates.len()];
        for g in gt.edges_between(pair.0, pair.1) {
            if let Some(i) = (0..candidates.len()).find(|&i| !claimed[i] && hit(candidates[i], g)) {
                claimed[i] = true;
                tp += 1;
            }
        }
    }
    EvalResult::from_counts(tp, pred.edge_count() - tp, gt.edge_count() - tp)
}

pub fn eval_predicates(pred: &SceneGraph, gt: &SceneGraph, spec: &MatchSpec) -> EvalResult {
    let m = match_instances(pred, gt, spec);
    eval_predicates_with(pred, gt, &m, spec.k)
}

pub fn eval_predicates_with(
    pred: &SceneGraph,
    gt: &SceneGraph,
    matching: &BTreeMap<InstanceId, InstanceId>,
    k: usize,
) -> EvalResult {
    eval_edges(pred, gt, matching, |p, g| p.predicate_in_top_k(g.predicate(), k))
}

pub fn eval_triplets(pred: &SceneGraph, gt: &SceneGraph, spec: &MatchSpec) -> EvalResult {
    let m = match_instances(pred, gt, spec);
    eval_triplets_with(pred, gt, &m, spec.k)
}

pub fn eval_triplets_with(
    pred: &SceneGraph,
    gt: &SceneGraph,
    matching: &BTreeMap<InstanceId, InstanceId>,
    k: usize,
) -> EvalResult {
    let label_ok = |p: InstanceId, g: InstanceId| match (pred.node(p), gt.node(g)) {
        (Some(p), Some(g)) => p.label_in_top_k(g.label(), k),
        _ => false,
    };
    eval_edges(pred, gt, matching, |p, g| {
        p.predicate_in_top_k(g.predicate(), k) && label_ok(p.subject(), g.subject()) && label_ok(p.object(), g.object())
    })
}

/// All three tasks under one matching.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskScores {
    pub triplet: EvalResult,
    pub object: EvalResult,
    pub predicate: EvalResult,
}

pub fn evaluate(pred: &SceneGraph, gt: &SceneGraph, spec: &MatchSpec) -> TaskScores {
    let m = match_instances(pred, gt, spec);
    TaskScores {
        triplet: eval_triplets_with(pred, gt, &m, spec.k),
        object: eval_objects_with(pred, gt, &m, spec.k),
        predicate: eval_predicates_with(pred, gt, &m, spec.k),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficEntry {
    pub sender: AgentId,
    /// `None` is the shared reference graph.
    pub receiver: Option<AgentId>,
    pub bytes: u64,
    pub t: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrafficLog {
    pub entries: Vec<TrafficEntry>,
}

impl TrafficLog {
    pub fn record(&mut self, entry: TrafficEntry) {
        self.entries.push(entry);
    }

    pub fn total_bytes(&self) -> u64 {
        self.entries.iter().map(|e| e.bytes).sum()
    }

    pub fn per_agent_bytes(&self) -> BTreeMap<AgentId, u64> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.sender).or_default() += e.bytes;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficSummary {
    pub total_mb: f64,
    pub per_agent_mb: f64,
}

pub fn traffic_summary(log: &TrafficLog, k_agents: usize) -> TrafficSummary {
    let total_mb = log.total_bytes() as f64 / BYTES_PER_MB;
    TrafficSummary {
        total_mb,
        per_agent_mb: if k_agents > 0 { total_mb / k_agents as f64 } else { 0.0 },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub total_align_seconds: f64,
    pub total_minutes: f64,
}

pub fn timing_summary(reports: &[AlignmentReport], wall: Duration) -> TimingSummary {
    TimingSummary {
        total_align_seconds: reports.iter().map(|r| r.align_seconds).sum(),
        total_minutes: wall.as_secs_f64() / 60.0,
    }
}
