use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use rand_core::CryptoRngCore;
use serde::{Deserialize, Serialize};

use super::{Confirmation, OfferPayload, ProtocolError, Verdict};
use crate::channel::{Addressed, ChannelError, KeyEpochState, MsgType};
use crate::cis::Fingerprint;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pending,
    NoAttack,
    Attack,
}

/// Raised once per process that ends in [`Outcome::Attack`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub process_id: String,
    pub coordinator_id: NodeId,
    pub unsafe_workers: Vec<NodeId>,
    pub missing_workers: Vec<NodeId>,
    pub timestamp_ms: u64,
}

#[derive(Serialize)]
struct AlertPayload<'a> {
    process_id: &'a str,
    coordinator_id: NodeId,
    unsafe_workers: &'a [NodeId],
    missing_workers: &'a [NodeId],
}

impl AlertEvent {
    /// UTF-8 JSON body carried by an Alert envelope.
    pub fn payload_json(&self) -> Vec<u8> {
        serde_json::to_vec(&AlertPayload {
            process_id: &self.process_id,
            coordinator_id: self.coordinator_id,
            unsafe_workers: &self.unsafe_workers,
            missing_workers: &self.missing_workers,
        })
        .expect("alert payload serializes")
    }
}

/// Coordinator-side tally for one process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusState {
    pub process_id: String,
    pub coordinator_id: NodeId,
    pub expected_workers: BTreeSet<NodeId>,
    pub received: BTreeMap<NodeId, Verdict>,
    pub deadline: Duration,
    outcome: Outcome,
    alert_emitted: bool,
}

impl ConsensusState {
    pub fn new(
        process_id: &str,
        coordinator_id: NodeId,
        expected_workers: BTreeSet<NodeId>,
        deadline: Duration,
    ) -> Self {
        Self {
            process_id: process_id.to_string(),
            coordinator_id,
            expected_workers,
            received: BTreeMap::new(),
            deadline,
            outcome: Outcome::Pending,
            alert_emitted: false,
        }
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn safe_count(&self) -> usize {
        self.received.values().filter(|v| **v == Verdict::Safe).count()
    }

    pub fn unsafe_workers(&self) -> Vec<NodeId> {
        self.received
            .iter()
            .filter(|(_, v)| **v == Verdict::Unsafe)
            .map(|(w, _)| *w)
            .collect()
    }

    pub fn missing_workers(&self) -> Vec<NodeId> {
        self.expected_workers
            .iter()
            .filter(|w| !self.received.contains_key(w))
            .copied()
            .collect()
    }

    /// Stores a replica's verdict. The first unsafe verdict decides Attack;
    /// the last outstanding safe verdict decides NoAttack. Once decided the
    /// outcome never changes, though later verdicts are still recorded.
    pub fn record_confirmation(&mut self, c: &Confirmation) -> Result<Outcome, ProtocolError> {
        if c.process_id != self.process_id {
            return Err(ProtocolError::ProcessMismatch {
                expected: self.process_id.clone(),
                got: c.process_id.clone(),
            });
        }
        if !self.expected_workers.contains(&c.worker_id) {
            return Err(ProtocolError::UnexpectedWorker(c.worker_id));
        }
        if self.received.contains_key(&c.worker_id) {
            return Err(ProtocolError::DuplicateConfirmation(c.worker_id));
        }
        self.received.insert(c.worker_id, c.verdict);
        if self.outcome == Outcome::Pending {
            if c.verdict == Verdict::Unsafe {
                self.outcome = Outcome::Attack;
            } else if self.safe_count() == self.expected_workers.len() {
                self.outcome = Outcome::NoAttack;
            }
        }
        Ok(self.outcome)
    }

    /// Closes the tally at `now`: a pending tally past its deadline becomes
    /// Attack with the silent replicas listed missing. The alert is produced
    /// the first time an Attack outcome is finalized and never again.
    pub fn finalize(&mut self, now: Duration) -> (Outcome, Option<AlertEvent>) {
        if self.outcome == Outcome::Pending && now >= self.deadline {
            self.outcome = Outcome::Attack;
        }
        if self.outcome != Outcome::Attack || self.alert_emitted {
            return (self.outcome, None);
        }
        self.alert_emitted = true;
        let alert = AlertEvent {
            process_id: self.process_id.clone(),
            coordinator_id: self.coordinator_id,
            unsafe_workers: self.unsafe_workers(),
            missing_workers: self.missing_workers(),
            timestamp_ms: now.as_millis() as u64,
        };
        (self.outcome, Some(alert))
    }

    pub fn alert_emitted(&self) -> bool {
        self.alert_emitted
    }
}

/// Result of [`make_offer`]: envelopes to send, replicas that could not be
/// reached, and the fresh tally.
#[derive(Debug)]
pub struct Offer {
    pub envelopes: Vec<Addressed>,
    pub unreachable: Vec<(NodeId, ChannelError)>,
    pub state: ConsensusState,
}

/// Encrypts the coordinator's digests once per replica. A replica with no
/// announced key gets no envelope and will show up missing at the deadline.
pub fn make_offer(
    local: &Fingerprint,
    replicas: &BTreeSet<NodeId>,
    channel: &KeyEpochState,
    now: Duration,
    timeout: Duration,
    rng: &mut impl CryptoRngCore,
) -> Result<Offer, ProtocolError> {
    if replicas.is_empty() {
        return Err(ProtocolError::NoReplicas);
    }
    let payload = OfferPayload::from(local).to_bytes();
    let mut envelopes = Vec::with_capacity(replicas.len());
    let mut unreachable = Vec::new();
    for &replica in replicas {
        match channel.encrypt_for(replica, MsgType::FingerprintOffer, &local.process_id, &payload, rng) {
            Ok(envelope) => envelopes.push(Addressed { to: replica, envelope }),
            Err(e) => unreachable.push((replica, e)),
        }
    }
    let state = ConsensusState::new(
        &local.process_id,
        channel.node_id(),
        replicas.clone(),
        now + timeout,
    );
    Ok(Offer {
        envelopes,
        unreachable,
        state,
    })
}
