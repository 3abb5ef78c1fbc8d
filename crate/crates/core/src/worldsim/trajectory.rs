use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AgentId, RoomId};

/// Allowed gap between requested and measured per-agent overlap.
pub const OVERLAP_TOLERANCE: f64 = 0.05;

/// Ordered room visits of one agent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTrajectory {
    pub agent: AgentId,
    pub rooms: Vec<RoomId>,
}

/// Fraction of each trajectory's rooms that some other trajectory also
/// visits.
pub fn measure_overlap(trajectories: &[AgentTrajectory]) -> Vec<f64> {
    let mut visitors: BTreeMap<RoomId, usize> = BTreeMap::new();
    for t in trajectories {
        for r in &t.rooms {
            *visitors.entry(*r).or_default() += 1;
        }
    }
    trajectories
        .iter()
        .map(|t| {
            if t.rooms.is_empty() {
                return 0.0;
            }
            let shared = t.rooms.iter().filter(|r| visitors[r] > 1).count();
            shared as f64 / t.rooms.len() as f64
        })
        .collect()
}

/// Overlap produced when every agent borrows `b` rooms from the next
/// agent's partition, for partition sizes `sizes`.
fn cyclic_overlap(sizes: &[usize], b: usize) -> Vec<f64> {
    if sizes.len() < 2 {
        return vec![0.0; sizes.len()];
    }
    sizes.iter().map(|&n| (2 * b) as f64 / (n + b) as f64).collect()
}

/// Splits `rooms` among `k_agents`, then lets each agent also visit rooms
/// from the next agent's share so that every agent's overlap approaches
/// `overlap_ratio`.
///
/// With `strict`, a request that no borrowing count can meet within
/// [`OVERLAP_TOLERANCE`] is an error. Otherwise the closest achievable
/// overlap is used. A single agent always has overlap 0.
pub fn plan_trajectories<R: Rng + ?Sized>(
    rooms: &[RoomId],
    k_agents: usize,
    overlap_ratio: f64,
    strict: bool,
    rng: &mut R,
) -> Result<Vec<AgentTrajectory>> {
    if k_agents < 1 {
        return Err(Error::Config("k_agents must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&overlap_ratio) {
        return Err(Error::Config(format!(
            "overlap ratio {overlap_ratio} is outside [0, 1)"
        )));
    }
    if rooms.len() < k_agents {
        return Err(Error::Overlap(format!(
            "{k_agents} agents need at least {k_agents} rooms, got {}",
            rooms.len()
        )));
    }
    let mut order = rooms.to_vec();
    order.shuffle(rng);
    let base = order.len() / k_agents;
    let extra = order.len() % k_agents;
    let mut parts = Vec::with_capacity(k_agents);
    let mut at = 0;
    for k in 0..k_agents {
        let n = base + usize::from(k < extra);
        parts.push(order[at..at + n].to_vec());
        at += n;
    }
    let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();

    let b = if k_agents == 1 {
        0
    } else {
        let max_b = *sizes.iter().min().unwrap();
        let deviation = |b: usize| {
            cyclic_overlap(&sizes, b)
                .iter()
                .map(|o| (o - overlap_ratio).abs())
                .fold(0.0, f64::max)
        };
        let best = (0..=max_b)
            .min_by(|&x, &y| deviation(x).total_cmp(&deviation(y)).then(x.cmp(&y)))
            .unwrap();
        if strict && deviation(best) > OVERLAP_TOLERANCE + 1e-12 {
            return Err(Error::Overlap(format!(
                "overlap {overlap_ratio} is unreachable with {} rooms and {k_agents} agents; \
                 partitions of {:?} rooms allow {:?}",
                rooms.len(),
                sizes,
                (0..=max_b).map(|b| cyclic_overlap(&sizes, b)).collect::<Vec<_>>()
            )));
        }
        best
    };

    let mut out = Vec::with_capacity(k_agents);
    for k in 0..k_agents {
        let mut seq = parts[k].clone();
        if b > 0 {
            // take from the end of the next share; the start of our own share
            // is what the previous agent takes
            let next = &parts[(k + 1) % k_agents];
            seq.extend_from_slice(&next[next.len() - b..]);
        }
        seq.shuffle(rng);
        out.push(AgentTrajectory {
            agent: AgentId(k as u32 + 1),
            rooms: seq,
        });
    }
    Ok(out)
}
