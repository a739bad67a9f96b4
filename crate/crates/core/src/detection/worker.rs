use std::collections::BTreeMap;
use std::time::Duration;

use super::{Confirmation, OfferPayload, Verdict};
use crate::cis::Fingerprint;
use crate::NodeId;

/// Safe iff the received combined digest equals the local one. A replica with
/// no local fingerprint answers unsafe.
pub fn worker_match(
    worker_id: NodeId,
    process_id: &str,
    received: &OfferPayload,
    local: Option<&Fingerprint>,
) -> Confirmation {
    let verdict = match local {
        Some(fp) if fp.combined == received.combined => Verdict::Safe,
        _ => Verdict::Unsafe,
    };
    Confirmation {
        process_id: process_id.to_string(),
        worker_id,
        verdict,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingOffer {
    pub process_id: String,
    pub coordinator: NodeId,
    pub digests: OfferPayload,
    pub deadline: Duration,
}

/// Replica-side state: local fingerprints by process and offers that arrived
/// before the local profile was ready.
#[derive(Debug, Clone)]
pub struct WorkerInbox {
    worker_id: NodeId,
    hold_timeout: Duration,
    local: BTreeMap<String, Fingerprint>,
    pending: BTreeMap<String, PendingOffer>,
}

impl WorkerInbox {
    pub fn new(worker_id: NodeId, hold_timeout: Duration) -> Self {
        Self {
            worker_id,
            hold_timeout,
            local: BTreeMap::new(),
            pending: BTreeMap::new(),
        }
    }

    pub fn local(&self, process_id: &str) -> Option<&Fingerprint> {
        self.local.get(process_id)
    }

    pub fn pending(&self, process_id: &str) -> Option<&PendingOffer> {
        self.pending.get(process_id)
    }

    /// Records the local fingerprint and answers any offer held for it.
    pub fn set_local(&mut self, fp: Fingerprint) -> Vec<(NodeId, Confirmation)> {
        let held = self.pending.remove(&fp.process_id);
        self.local.insert(fp.process_id.clone(), fp);
        held.map(|offer| {
            let local = self.local.get(&offer.process_id);
            let c = worker_match(self.worker_id, &offer.process_id, &offer.digests, local);
            (offer.coordinator, c)
        })
        .into_iter()
        .collect()
    }

    /// Answers immediately when the local fingerprint exists, otherwise holds
    /// the offer until `now + hold_timeout`. A repeated offer for a process
    /// already held is ignored.
    pub fn receive_offer(
        &mut self,
        coordinator: NodeId,
        process_id: &str,
        digests: OfferPayload,
        now: Duration,
    ) -> Option<(NodeId, Confirmation)> {
        if let Some(local) = self.local.get(process_id) {
            return Some((
                coordinator,
                worker_match(self.worker_id, process_id, &digests, Some(local)),
            ));
        }
        self.pending
            .entry(process_id.to_string())
            .or_insert_with(|| PendingOffer {
                process_id: process_id.to_string(),
                coordinator,
                digests,
                deadline: now + self.hold_timeout,
            });
        None
    }

    /// Answers unsafe for every held offer whose deadline has passed.
    pub fn expire(&mut self, now: Duration) -> Vec<(NodeId, Confirmation)> {
        let due: Vec<String> = self
            .pending
            .values()
            .filter(|p| p.deadline <= now)
            .map(|p| p.process_id.clone())
            .collect();
        due.into_iter()
            .filter_map(|pid| self.pending.remove(&pid))
            .map(|offer| {
                let c = worker_match(self.worker_id, &offer.process_id, &offer.digests, None);
                (offer.coordinator, c)
            })
            .collect()
    }
}
