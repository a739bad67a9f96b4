//! Discrete-event cluster simulation: nodes, replicated processes, tampering,
//! synthetic workloads and overhead metrics.

mod cluster;
mod config;
mod corpus;
mod metrics;
mod patch;
mod scenario;

use thiserror::Error;

use crate::NodeId;

pub use cluster::{Cluster, ProcessResult, ScheduledProcess};
pub use config::{ClusterConfig, CostModel, LatencyModel, TimingMode};
pub use corpus::{
    generate_for_cfi, generate_listing, generate_with_counts, GeneratedListing, InstructionMix,
    Tally,
};
pub use metrics::{linear_fit, overhead_percent, Aggregate, LinearFit, MetricsReport, ProcessReport};
pub use patch::{foo_snippet, AppliedPatch, PatchError, SourceText, TamperPatch};
pub use scenario::{
    ProcessSpec, Scenario, ScenarioConfig, ScenarioError, ScenarioOutcome, SourceRef, TimingChoice,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid cluster config: {0}")]
    InvalidConfig(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown process {0:?}")]
    UnknownProcess(String),
    #[error("process {0:?} is already scheduled")]
    DuplicateProcess(String),
    #[error("process {0:?} has already started")]
    AlreadyStarted(String),
    #[error("node {node} does not host process {process_id:?}")]
    NotHosting { node: NodeId, process_id: String },
    #[error("invalid process {0:?}: {1}")]
    InvalidProcess(String, String),
    #[error(transparent)]
    Patch(#[from] PatchError),
    #[error("no process has completed")]
    NoCompletedProcesses,
}
