//! Hash matching on the replicas and all-safe consensus on the coordinator.
//!
//! The coordinator (node with the primary copy) sends each replica an
//! encrypted [`OfferPayload`]. A replica compares it with its own fingerprint
//! and answers with a [`Verdict`]. The coordinator declares
//! [`Outcome::NoAttack`] only when every replica answered safe; a single
//! unsafe answer, or silence past the deadline, is an attack.

mod consensus;
mod worker;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelError;
use crate::cis::{Digest, Fingerprint};
use crate::NodeId;

pub use consensus::{make_offer, AlertEvent, ConsensusState, Offer, Outcome};
pub use worker::{worker_match, PendingOffer, WorkerInbox};

/// Default time a coordinator waits for confirmations, and a replica holds an
/// offer it cannot answer yet.
pub const DEFAULT_CONSENSUS_TIMEOUT: std::time::Duration = std::time::Duration::from_secs(5);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("an offer needs at least one replica")]
    NoReplicas,
    #[error("confirmation from {0}, which is not a replica of this process")]
    UnexpectedWorker(NodeId),
    #[error("second confirmation from {0} ignored")]
    DuplicateConfirmation(NodeId),
    #[error("confirmation for process {got:?} delivered to consensus for {expected:?}")]
    ProcessMismatch { expected: String, got: String },
    #[error("malformed {kind} payload of {len} bytes")]
    BadPayload { kind: &'static str, len: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Safe,
    Unsafe,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confirmation {
    pub process_id: String,
    pub worker_id: NodeId,
    pub verdict: Verdict,
}

impl Confirmation {
    /// One byte: 0x01 safe, 0x00 unsafe.
    pub fn payload(&self) -> [u8; 1] {
        match self.verdict {
            Verdict::Safe => [0x01],
            Verdict::Unsafe => [0x00],
        }
    }

    pub fn from_payload(
        process_id: &str,
        worker_id: NodeId,
        bytes: &[u8],
    ) -> Result<Self, ProtocolError> {
        let verdict = match bytes {
            [0x01] => Verdict::Safe,
            [0x00] => Verdict::Unsafe,
            _ => {
                return Err(ProtocolError::BadPayload {
                    kind: "confirmation",
                    len: bytes.len(),
                })
            }
        };
        Ok(Self {
            process_id: process_id.to_string(),
            worker_id,
            verdict,
        })
    }
}

/// Digests carried by a fingerprint offer: combined, then jump, call, return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfferPayload {
    pub combined: Digest,
    pub jump: Digest,
    pub call: Digest,
    pub ret: Digest,
}

impl OfferPayload {
    pub const LEN: usize = 128;

    pub fn to_bytes(&self) -> [u8; Self::LEN] {
        let mut out = [0u8; Self::LEN];
        for (chunk, d) in out
            .chunks_exact_mut(32)
            .zip([self.combined, self.jump, self.call, self.ret])
        {
            chunk.copy_from_slice(&d.0);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.len() != Self::LEN {
            return Err(ProtocolError::BadPayload {
                kind: "fingerprint offer",
                len: bytes.len(),
            });
        }
        let d = |i: usize| Digest(bytes[i * 32..(i + 1) * 32].try_into().unwrap());
        Ok(Self {
            combined: d(0),
            jump: d(1),
            call: d(2),
            ret: d(3),
        })
    }
}

impl From<&Fingerprint> for OfferPayload {
    fn from(fp: &Fingerprint) -> Self {
        Self {
            combined: fp.combined,
            jump: fp.jump_digest,
            call: fp.call_digest,
            ret: fp.return_digest,
        }
    }
}
