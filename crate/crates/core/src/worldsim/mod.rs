//! Synthetic worlds, agent trajectories, the observation model and the
//! dynamics applied between exploration passes.

pub mod dynamics;
#[cfg(feature = "ingest-3dssg")]
pub mod ingest;
pub mod observe;
pub mod trajectory;
pub mod vocab;
pub mod world;

pub use dynamics::{apply_dynamics, sample_schedule, DynamicsCounts, DynamicsProportions, DynamicsSchedule, Move};
#[cfg(feature = "ingest-3dssg")]
pub use ingest::ingest_3dssg;
pub use observe::{observe, ObservationNoise};
pub use trajectory::{measure_overlap, plan_trajectories, AgentTrajectory, OVERLAP_TOLERANCE};
pub use world::{
    deserialize_world, generate_world, read_world, serialize_world, write_world, GroundTruthWorld, Room, Vocabulary,
    WorldParams,
};
