//! JSON scenario files: cluster settings, processes and tamper patches.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cis::ProfileOptions;
use crate::NodeId;

use super::cluster::{Cluster, ProcessResult, ScheduledProcess};
use super::config::{ClusterConfig, CostModel, LatencyModel, TimingMode};
use super::metrics::MetricsReport;
use super::patch::TamperPatch;
use super::SimError;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("source for process {0:?} is a path that has not been loaded")]
    UnresolvedSource(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// A listing given inline or as a file path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SourceRef {
    Inline { inline: String },
    Path { path: String },
    Bare(String),
}

impl SourceRef {
    fn load(&self, base: &Path) -> Result<String, ScenarioError> {
        match self {
            SourceRef::Inline { inline } => Ok(inline.clone()),
            SourceRef::Path { path } | SourceRef::Bare(path) => {
                let full = base.join(path);
                std::fs::read_to_string(&full).map_err(|source| ScenarioError::Io { path: full, source })
            }
        }
    }

    fn inline_text(&self) -> Option<&str> {
        match self {
            SourceRef::Inline { inline } => Some(inline),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingChoice {
    #[default]
    Modeled,
    Measured,
}

fn default_rotation_ms() -> u64 {
    1000
}
fn default_key_history() -> usize {
    3
}
fn default_timeout_ms() -> u64 {
    5000
}
fn default_max_time_ms() -> u64 {
    600_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub node_count: usize,
    pub replication_factor: usize,
    #[serde(default = "default_rotation_ms")]
    pub rotation_ms: u64,
    #[serde(default = "default_key_history")]
    pub key_history: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub latency: LatencyModel,
    #[serde(default)]
    pub timing: TimingChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_model: Option<CostModel>,
    #[serde(default)]
    pub include_operands: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_node: Option<NodeId>,
    /// Virtual time after which the run stops even if work is outstanding.
    #[serde(default = "default_max_time_ms")]
    pub max_time_ms: u64,
}

impl ScenarioConfig {
    pub fn new(node_count: usize, replication_factor: usize) -> Self {
        Self {
            node_count,
            replication_factor,
            rotation_ms: default_rotation_ms(),
            key_history: default_key_history(),
            timeout_ms: default_timeout_ms(),
            seed: 0,
            latency: LatencyModel::default(),
            timing: TimingChoice::default(),
            cost_model: None,
            include_operands: false,
            master_node: None,
            max_time_ms: default_max_time_ms(),
        }
    }

    pub fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            node_count: self.node_count,
            replication_factor: self.replication_factor,
            rotation_period: Duration::from_millis(self.rotation_ms),
            key_history_depth: self.key_history,
            consensus_timeout: Duration::from_millis(self.timeout_ms),
            rng_seed: self.seed,
            latency: self.latency,
            timing: match self.timing {
                TimingChoice::Measured => TimingMode::Measured,
                TimingChoice::Modeled => TimingMode::Modeled(self.cost_model.unwrap_or_default()),
            },
            profile: ProfileOptions {
                include_operands: self.include_operands,
            },
            master_node: self.master_node,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub process_id: String,
    /// Listing used on every hosting node unless overridden below.
    pub source: SourceRef,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub node_sources: BTreeMap<NodeId, SourceRef>,
    pub primary: NodeId,
    pub replicas: Vec<NodeId>,
    pub exec_time_ms: u64,
    #[serde(default)]
    pub start_ms: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub profile_delay_ms: BTreeMap<NodeId, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: ScenarioConfig,
    #[serde(default)]
    pub processes: Vec<ProcessSpec>,
    #[serde(default)]
    pub patches: Vec<TamperPatch>,
}

/// Everything a scenario run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub results: Vec<ProcessResult>,
    pub report: Option<MetricsReport>,
    pub warnings: Vec<String>,
    pub trace: Vec<String>,
}

impl ScenarioOutcome {
    pub fn attack_detected(&self) -> bool {
        self.results
            .iter()
            .any(|r| r.outcome == crate::detection::Outcome::Attack)
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a scenario file and loads every path source relative to it.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut scenario = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        scenario.resolve_sources(base)?;
        Ok(scenario)
    }

    /// Replaces path sources with their contents.
    pub fn resolve_sources(&mut self, base_dir: &Path) -> Result<(), ScenarioError> {
        for p in &mut self.processes {
            p.source = SourceRef::Inline {
                inline: p.source.load(base_dir)?,
            };
            for src in p.node_sources.values_mut() {
                *src = SourceRef::Inline {
                    inline: src.load(base_dir)?,
                };
            }
        }
        Ok(())
    }

    fn scheduled(&self, p: &ProcessSpec) -> Result<ScheduledProcess, ScenarioError> {
        let unresolved = || ScenarioError::UnresolvedSource(p.process_id.clone());
        let default = p.source.inline_text().ok_or_else(unresolved)?;
        let mut sp = ScheduledProcess::replicated(
            p.process_id.clone(),
            default,
            p.primary,
            p.replicas.clone(),
            Duration::from_millis(p.exec_time_ms),
        );
        for (node, src) in &p.node_sources {
            sp.sources
                .insert(*node, src.inline_text().ok_or_else(unresolved)?.to_string());
        }
        sp.start_at = Duration::from_millis(p.start_ms);
        sp.profile_delay = p
            .profile_delay_ms
            .iter()
            .map(|(n, ms)| (*n, Duration::from_millis(*ms)))
            .collect();
        Ok(sp)
    }

    /// Builds the cluster, schedules every process and applies the patches.
    pub fn build(&self) -> Result<Cluster, ScenarioError> {
        let mut cluster = Cluster::build(self.config.cluster_config())?;
        for p in &self.processes {
            cluster.schedule_process(self.scheduled(p)?)?;
        }
        for patch in &self.patches {
            cluster.inject_tamper(patch)?;
        }
        Ok(cluster)
    }

    pub fn run(&self) -> Result<ScenarioOutcome, ScenarioError> {
        let mut cluster = self.build()?;
        let results = cluster.run_until_quiet(Duration::from_millis(self.config.max_time_ms));
        let report = match cluster.report_metrics() {
            Ok(r) => Some(r),
            Err(SimError::NoCompletedProcesses) => None,
            Err(e) => return Err(e.into()),
        };
        Ok(ScenarioOutcome {
            results,
            report,
            warnings: cluster.warnings().to_vec(),
            trace: cluster.trace().to_vec(),
        })
    }
}
