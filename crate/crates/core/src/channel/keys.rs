use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::time::Duration;

use rand_core::CryptoRngCore;
use x25519_dalek::{PublicKey, StaticSecret};

use super::crypto::{self, PUBLIC_KEY_LEN, SEAL_OVERHEAD};
use super::envelope::{Envelope, MsgType, MAX_PAYLOAD};
use super::ChannelError;
use crate::NodeId;

pub const DEFAULT_ROTATION_PERIOD: Duration = Duration::from_secs(1);
pub const DEFAULT_KEY_HISTORY_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelConfig {
    pub node_id: NodeId,
    /// How long a key pair stays current.
    pub rotation_period: Duration,
    /// Keys retained per peer, both received public keys and own private keys.
    pub key_history_depth: usize,
}

impl ChannelConfig {
    pub fn new(node_id: NodeId) -> Self {
        Self {
            node_id,
            rotation_period: DEFAULT_ROTATION_PERIOD,
            key_history_depth: DEFAULT_KEY_HISTORY_DEPTH,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.rotation_period.is_zero() {
            return Err(ChannelError::InvalidConfig("rotation period must be positive"));
        }
        if self.key_history_depth == 0 {
            return Err(ChannelError::InvalidConfig("key history depth must be at least 1"));
        }
        Ok(())
    }
}

/// A key pair serving one peer for one epoch.
#[derive(Clone)]
pub struct KeyPair {
    pub peer_id: NodeId,
    pub epoch: u64,
    pub public_part: PublicKey,
    pub private_part: StaticSecret,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("peer_id", &self.peer_id)
            .field("epoch", &self.epoch)
            .field("public_part", &hex::encode(self.public_part.as_bytes()))
            .finish_non_exhaustive()
    }
}

/// An envelope together with its destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Addressed {
    pub to: NodeId,
    pub envelope: Envelope,
}

/// Fixed-capacity FIFO: pushing onto a full queue drops the front.
fn push_bounded<T>(queue: &mut VecDeque<T>, item: T, cap: usize) {
    while queue.len() >= cap {
        queue.pop_front();
    }
    queue.push_back(item);
}

/// One node's key store: its own recent private keys per peer and the queue of
/// public keys each peer has announced.
pub struct KeyEpochState {
    config: ChannelConfig,
    peers: BTreeSet<NodeId>,
    epoch: u64,
    last_rotation: Option<Duration>,
    last_generated: BTreeMap<NodeId, u64>,
    own_private_history: BTreeMap<NodeId, VecDeque<(u64, StaticSecret)>>,
    peer_public_queues: BTreeMap<NodeId, VecDeque<(u64, PublicKey)>>,
}

impl fmt::Debug for KeyEpochState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyEpochState")
            .field("node_id", &self.config.node_id)
            .field("epoch", &self.epoch)
            .field("peers", &self.peers)
            .field("private_epochs", &self.private_epochs_all())
            .field("public_epochs", &self.public_epochs_all())
            .finish()
    }
}

impl KeyEpochState {
    pub fn new(
        config: ChannelConfig,
        peers: impl IntoIterator<Item = NodeId>,
    ) -> Result<Self, ChannelError> {
        config.validate()?;
        let me = config.node_id;
        Ok(Self {
            peers: peers.into_iter().filter(|p| *p != me).collect(),
            config,
            epoch: 0,
            last_rotation: None,
            last_generated: BTreeMap::new(),
            own_private_history: BTreeMap::new(),
            peer_public_queues: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    pub fn node_id(&self) -> NodeId {
        self.config.node_id
    }

    pub fn peers(&self) -> &BTreeSet<NodeId> {
        &self.peers
    }

    /// Epoch of the most recent rotation (0 before the first).
    pub fn current_epoch(&self) -> u64 {
        self.epoch
    }

    pub fn last_rotation(&self) -> Option<Duration> {
        self.last_rotation
    }

    /// Whether a full rotation period has elapsed since the last rotation.
    pub fn rotation_due(&self, now: Duration) -> bool {
        match self.last_rotation {
            None => true,
            Some(at) => now.saturating_sub(at) >= self.config.rotation_period,
        }
    }

    /// Fresh key pair for `peer`. Epochs must strictly increase per peer.
    pub fn generate_keypair(
        &mut self,
        peer_id: NodeId,
        epoch: u64,
        rng: &mut impl CryptoRngCore,
    ) -> Result<KeyPair, ChannelError> {
        let last = self.last_generated.get(&peer_id).copied().unwrap_or(0);
        if epoch <= last {
            return Err(ChannelError::NonMonotonicEpoch {
                peer: peer_id,
                epoch,
                last,
            });
        }
        self.last_generated.insert(peer_id, epoch);
        let private_part = StaticSecret::random_from_rng(&mut *rng);
        Ok(KeyPair {
            peer_id,
            epoch,
            public_part: PublicKey::from(&private_part),
            private_part,
        })
    }

    /// Starts a new epoch: one key pair per peer, private halves retained
    /// (oldest evicted beyond the history depth), public halves returned as
    /// KeyAnnounce envelopes addressed to their peers.
    pub fn rotate_epoch(&mut self, now: Duration, rng: &mut impl CryptoRngCore) -> Vec<Addressed> {
        self.epoch += 1;
        self.last_rotation = Some(now);
        let epoch = self.epoch;
        let depth = self.config.key_history_depth;
        let me = self.config.node_id;
        let peers: Vec<NodeId> = self.peers.iter().copied().collect();
        let mut out = Vec::with_capacity(peers.len());
        for peer in peers {
            let kp = self
                .generate_keypair(peer, epoch, rng)
                .expect("rotation epoch is always ahead of any generated epoch");
            let history = self.own_private_history.entry(peer).or_default();
            push_bounded(history, (epoch, kp.private_part), depth);
            out.push(Addressed {
                to: peer,
                envelope: Envelope::new(
                    MsgType::KeyAnnounce,
                    me,
                    "",
                    epoch,
                    kp.public_part.as_bytes().to_vec(),
                ),
            });
        }
        out
    }

    /// Stores a public key announced by `peer`. Announcements that do not
    /// advance the peer's newest epoch are ignored. Returns whether the key
    /// was accepted.
    pub fn record_peer_key(
        &mut self,
        peer_id: NodeId,
        public_key: &[u8],
        epoch: u64,
    ) -> Result<bool, ChannelError> {
        let key: [u8; PUBLIC_KEY_LEN] = public_key
            .try_into()
            .map_err(|_| ChannelError::InvalidPublicKey(public_key.len()))?;
        let depth = self.config.key_history_depth;
        let queue = self.peer_public_queues.entry(peer_id).or_default();
        if queue.back().is_some_and(|(newest, _)| epoch <= *newest) {
            return Ok(false);
        }
        push_bounded(queue, (epoch, PublicKey::from(key)), depth);
        Ok(true)
    }

    /// Applies a received KeyAnnounce envelope.
    pub fn accept_announce(&mut self, env: &Envelope) -> Result<bool, ChannelError> {
        if env.msg_type != MsgType::KeyAnnounce {
            return Err(ChannelError::UnexpectedType(env.msg_type));
        }
        self.record_peer_key(env.sender_id, &env.payload, env.key_epoch)
    }

    /// Encrypts under the newest public key known for `peer`.
    pub fn encrypt_for(
        &self,
        peer_id: NodeId,
        msg_type: MsgType,
        process_id: &str,
        plaintext: &[u8],
        rng: &mut impl CryptoRngCore,
    ) -> Result<Envelope, ChannelError> {
        if msg_type == MsgType::KeyAnnounce {
            return Err(ChannelError::UnexpectedType(msg_type));
        }
        if plaintext.len() + SEAL_OVERHEAD > MAX_PAYLOAD {
            return Err(ChannelError::PayloadTooLarge(plaintext.len()));
        }
        let (epoch, key) = self
            .peer_public_queues
            .get(&peer_id)
            .and_then(|q| q.back())
            .ok_or(ChannelError::NoKeyForPeer(peer_id))?;
        let mut env = Envelope::new(msg_type, self.config.node_id, process_id, *epoch, Vec::new());
        env.payload = crypto::seal(key, &env.header_bytes(), plaintext, rng);
        Ok(env)
    }

    /// Decrypts with the private key this node issued to the sender for the
    /// envelope's epoch.
    pub fn decrypt(&self, env: &Envelope) -> Result<Vec<u8>, ChannelError> {
        if env.msg_type == MsgType::KeyAnnounce {
            return Err(ChannelError::UnexpectedType(env.msg_type));
        }
        let peer = env.sender_id;
        let history = self
            .own_private_history
            .get(&peer)
            .filter(|h| !h.is_empty())
            .ok_or(ChannelError::UnknownPeer(peer))?;
        let oldest = history.front().map(|(e, _)| *e).unwrap_or_default();
        let newest = history.back().map(|(e, _)| *e).unwrap_or_default();
        let epoch = env.key_epoch;
        if epoch < oldest {
            return Err(ChannelError::StaleKey { peer, epoch, oldest });
        }
        if epoch > newest {
            return Err(ChannelError::UnknownEpoch { peer, epoch });
        }
        let secret = history
            .iter()
            .find(|(e, _)| *e == epoch)
            .map(|(_, s)| s)
            .ok_or(ChannelError::UnknownEpoch { peer, epoch })?;
        crypto::open(secret, &env.header_bytes(), &env.payload).ok_or(ChannelError::DecryptFailure)
    }

    /// Epochs of the public keys held for `peer`, front (oldest) to back.
    pub fn public_epochs(&self, peer: NodeId) -> Vec<u64> {
        self.peer_public_queues
            .get(&peer)
            .map(|q| q.iter().map(|(e, _)| *e).collect())
            .unwrap_or_default()
    }

    /// Epochs of the private keys retained for `peer`, oldest first.
    pub fn private_epochs(&self, peer: NodeId) -> Vec<u64> {
        self.own_private_history
            .get(&peer)
            .map(|q| q.iter().map(|(e, _)| *e).collect())
            .unwrap_or_default()
    }

    pub fn public_epochs_all(&self) -> BTreeMap<NodeId, Vec<u64>> {
        self.peer_public_queues
            .keys()
            .map(|p| (*p, self.public_epochs(*p)))
            .collect()
    }

    pub fn private_epochs_all(&self) -> BTreeMap<NodeId, Vec<u64>> {
        self.own_private_history
            .keys()
            .map(|p| (*p, self.private_epochs(*p)))
            .collect()
    }

    /// Newest public key known for `peer`.
    pub fn latest_public(&self, peer: NodeId) -> Option<(u64, [u8; 32])> {
        self.peer_public_queues
            .get(&peer)?
            .back()
            .map(|(e, k)| (*e, *k.as_bytes()))
    }
}
