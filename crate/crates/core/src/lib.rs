//! Decentralized fusion of 3D semantic scene graphs from multiple agents.
//!
//! The pieces, bottom up: [`graph`] holds the scene-graph data model and
//! [`codec`] its canonical JSON encoding; [`alignment`] finds a label-seeded
//! common subgraph between a query graph and the shared reference graph and
//! [`update`] reconciles matched nodes and relations; [`worldsim`] produces
//! ground-truth worlds and simulated observations; [`metrics`] scores
//! results; [`harness`] runs whole scenarios.

pub mod alignment;
pub mod cli;
pub mod codec;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod update;
pub mod worldsim;

pub use error::{Error, Result};
