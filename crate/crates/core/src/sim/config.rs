use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{DEFAULT_KEY_HISTORY_DEPTH, DEFAULT_ROTATION_PERIOD};
use crate::cis::ProfileOptions;
use crate::detection::DEFAULT_CONSENSUS_TIMEOUT;
use crate::NodeId;

use super::SimError;

/// Per-message network delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyModel {
    Fixed { ms: u64 },
    Uniform { min_ms: u64, max_ms: u64 },
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel::Fixed { ms: 1 }
    }
}

impl LatencyModel {
    pub fn sample(&self, rng: &mut impl Rng) -> Duration {
        match *self {
            LatencyModel::Fixed { ms } => Duration::from_millis(ms),
            LatencyModel::Uniform { min_ms, max_ms } => {
                Duration::from_micros(rng.gen_range(min_ms * 1000..=max_ms * 1000))
            }
        }
    }
}

/// Virtual cost charged per unit of detection work when timing is modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub per_instruction_ns: u64,
    pub per_control_token_ns: u64,
    pub per_crypto_op_ns: u64,
    pub per_match_ns: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            per_instruction_ns: 25,
            per_control_token_ns: 40,
            per_crypto_op_ns: 60_000,
            per_match_ns: 1_000,
        }
    }
}

/// How `time_detect` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    /// Wall-clock time of the detection work. Varies run to run.
    Measured,
    /// Deterministic cost from operation counts.
    Modeled(CostModel),
}

impl TimingMode {
    pub fn label(&self) -> &'static str {
        match self {
            TimingMode::Measured => "measured",
            TimingMode::Modeled(_) => "modeled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub node_count: usize,
    pub replication_factor: usize,
    pub rotation_period: Duration,
    pub key_history_depth: usize,
    pub consensus_timeout: Duration,
    pub rng_seed: u64,
    pub latency: LatencyModel,
    pub timing: TimingMode,
    pub profile: ProfileOptions,
    /// Node that receives Alert envelopes, if any.
    pub master_node: Option<NodeId>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            node_count: 4,
            replication_factor: 3,
            rotation_period: DEFAULT_ROTATION_PERIOD,
            key_history_depth: DEFAULT_KEY_HISTORY_DEPTH,
            consensus_timeout: DEFAULT_CONSENSUS_TIMEOUT,
            rng_seed: 0,
            latency: LatencyModel::default(),
            timing: TimingMode::Modeled(CostModel::default()),
            profile: ProfileOptions::default(),
            master_node: None,
        }
    }
}

impl ClusterConfig {
    pub fn new(node_count: usize, replication_factor: usize) -> Self {
        Self {
            node_count,
            replication_factor,
            ..Default::default()
        }
    }

    /// Checks the config; returns warnings for valid but degenerate setups.
    pub fn validate(&self) -> Result<Vec<String>, SimError> {
        let invalid = |m: String| Err(SimError::InvalidConfig(m));
        if self.node_count == 0 {
            return invalid("node_count must be positive".into());
        }
        if self.replication_factor == 0 {
            return invalid("replication_factor must be positive".into());
        }
        if self.replication_factor > self.node_count {
            return invalid(format!(
                "replication_factor {} exceeds node_count {}",
                self.replication_factor, self.node_count
            ));
        }
        if self.node_count > u32::MAX as usize {
            return invalid("node_count does not fit a node id".into());
        }
        if self.rotation_period.is_zero() {
            return invalid("rotation period must be positive".into());
        }
        if self.key_history_depth == 0 {
            return invalid("key history depth must be at least 1".into());
        }
        if self.consensus_timeout.is_zero() {
            return invalid("consensus timeout must be positive".into());
        }
        if let LatencyModel::Uniform { min_ms, max_ms } = self.latency {
            if min_ms > max_ms {
                return invalid(format!("latency range {min_ms}..{max_ms} is empty"));
            }
        }
        if let Some(m) = self.master_node {
            if m.0 as usize >= self.node_count {
                return invalid(format!("master node {m} does not exist"));
            }
        }
        let mut warnings = Vec::new();
        if self.replication_factor < 2 {
            warnings.push("no workers: replication factor 1 leaves nothing to compare against".into());
        }
        Ok(warnings)
    }
}
