use crate::graph::InstanceId;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node {0}")]
    UnknownNode(InstanceId),
    #[error("duplicate node {0}")]
    DuplicateNode(InstanceId),
    #[error("duplicate edge {subject} -[{predicate}]-> {object}")]
    DuplicateEdge {
        subject: InstanceId,
        predicate: String,
        object: InstanceId,
    },
    #[error("edge {subject} -> {object} references a missing node")]
    DanglingEdge { subject: InstanceId, object: InstanceId },
    #[error("self-loop on node {0}")]
    SelfLoop(InstanceId),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid node: {0}")]
    InvalidNode(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("overlap unreachable: {0}")]
    Overlap(String),
    #[error("infeasible world: {0}")]
    InfeasibleWorld(String),
    #[error("invalid dynamics schedule: {0}")]
    Schedule(String),
    #[error("empty graph")]
    EmptyGraph,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
