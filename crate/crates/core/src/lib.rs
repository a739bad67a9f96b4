//! Insider attack detection for replicated clusters.
//!
//! Every node hosting a copy of a process profiles the process's assembly
//! listing into jump, call and return sequences and reduces them to a
//! hash-of-hashes [`Fingerprint`](cis::Fingerprint). The node holding the
//! primary copy offers its fingerprint to the replicas over an encrypted,
//! key-rotating channel; each replica answers safe or unsafe and the
//! coordinator declares an attack unless every replica agrees.
//!
//! - [`cis`]: listing parser, control-flow filter, sequences, fingerprints.
//! - [`channel`]: rotating key store, sealed envelopes, wire codec.
//! - [`detection`]: worker matching and coordinator consensus.
//! - [`sim`]: deterministic cluster harness, tamper patches, metrics.
//! - [`api`]: JSON request/response types shared by the service and client.

use std::fmt;

use serde::{Deserialize, Serialize};

pub mod api;
pub mod channel;
pub mod cis;
pub mod detection;
pub mod sim;

/// Identifies a node in the cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}
