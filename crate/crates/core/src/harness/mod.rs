//! Scenario configuration, the exploration passes, the single-writer merge
//! loop and run reports.

pub mod config;
pub mod report;
pub mod run;

pub use config::{Scenario, ScenarioConfig, TrafficMode};
pub use report::{read_metrics, write_csv, MetricsReport, RunReport, CSV_HEADER};
pub use run::{merge_loop, run_ldcp, run_scenario, run_scp, run_with_world, stream_rng, Message, RunArtifacts};
