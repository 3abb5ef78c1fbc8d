use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::alignment::{Thresholds, DEFAULT_MAX_ANCHORS};
use crate::error::{Error, Result};
use crate::metrics::MatchSpec;
use crate::worldsim::{DynamicsCounts, DynamicsProportions, ObservationNoise, WorldParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// One exploration pass over a static world.
    #[serde(rename = "SCP", alias = "scp")]
    Scp,
    /// A second pass after objects moved, vanished or changed.
    #[serde(rename = "LDCP", alias = "ldcp")]
    Ldcp,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scenario::Scp => "SCP",
            Scenario::Ldcp => "LDCP",
        })
    }
}

/// What counts as transmitted data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficMode {
    #[serde(alias = "graphs")]
    GraphsOnly,
    /// Adds a point cloud per transmitted instance, as a raw-geometry
    /// sharing scheme would send.
    #[serde(alias = "points")]
    GraphsPlusPoints,
}

fn default_rooms() -> usize {
    47
}
fn default_agents() -> usize {
    5
}
fn default_overlap() -> f64 {
    0.2
}
fn default_instances() -> [usize; 2] {
    [30, 38]
}
fn default_max_anchors() -> usize {
    DEFAULT_MAX_ANCHORS
}
fn default_traffic() -> TrafficMode {
    TrafficMode::GraphsOnly
}
fn default_points() -> u64 {
    10_000
}
fn default_point_bytes() -> u64 {
    12
}
fn default_true() -> bool {
    true
}
fn default_scenario() -> Scenario {
    Scenario::Scp
}

/// Everything that determines a run. Only `seed` is mandatory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_scenario")]
    pub scenario: Scenario,
    #[serde(default = "default_rooms")]
    pub n_rooms: usize,
    #[serde(default = "default_instances")]
    pub instances_per_room: [usize; 2],
    #[serde(default = "default_agents")]
    pub k_agents: usize,
    #[serde(default = "default_overlap")]
    pub overlap_ratio: f64,
    /// Fail instead of falling back to the closest achievable overlap.
    #[serde(default)]
    pub strict_overlap: bool,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "default_max_anchors")]
    pub max_anchors: usize,
    #[serde(default)]
    pub noise: ObservationNoise,
    #[serde(default)]
    pub dynamics: DynamicsProportions,
    /// Absolute counts; overrides `dynamics` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics_counts: Option<DynamicsCounts>,
    pub seed: u64,
    #[serde(default = "default_traffic")]
    pub traffic_mode: TrafficMode,
    #[serde(default = "default_points")]
    pub points_per_instance: u64,
    #[serde(default = "default_point_bytes")]
    pub bytes_per_point: u64,
    #[serde(default)]
    pub eval: MatchSpec,
    /// Wall-clock fields are written as 0 when false, which makes reports
    /// byte-reproducible.
    #[serde(default = "default_true")]
    pub record_timings: bool,
    /// Use this world instead of generating one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn new(seed: u64) -> Self {
        serde_json::from_str(&format!("{{\"seed\":{seed}}}")).expect("defaults are valid")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(bytes).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&bytes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn world_params(&self) -> WorldParams {
        WorldParams {
            n_rooms: self.n_rooms,
            instances_per_room: self.instances_per_room,
            ..WorldParams::full_scale()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        self.noise.validate()?;
        self.dynamics.validate()?;
        self.eval.validate()?;
        if self.world_file.is_none() {
            self.world_params().validate()?;
        }
        if self.k_agents < 1 {
            return Err(Error::Config("k_agents must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.overlap_ratio) {
            return Err(Error::Config(format!(
                "overlap_ratio {} is outside [0, 1)",
                self.overlap_ratio
            )));
        }
        if self.max_anchors < 1 {
            return Err(Error::Config("max_anchors must be at least 1".into()));
        }
        Ok(())
    }
}
