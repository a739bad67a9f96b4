//! Secure channel between node security modules: periodic per-peer key
//! pairs, bounded public-key queues, sealed envelopes and their wire codec.

mod crypto;
mod envelope;
mod keys;

use thiserror::Error;

use crate::NodeId;

pub use crypto::{PUBLIC_KEY_LEN, SEAL_OVERHEAD};
pub use envelope::{
    decode_envelope, decode_frame, encode_envelope, CodecError, Envelope, MsgType, MAGIC,
    MAX_PAYLOAD, VERSION,
};
pub use keys::{
    Addressed, ChannelConfig, KeyEpochState, KeyPair, DEFAULT_KEY_HISTORY_DEPTH,
    DEFAULT_ROTATION_PERIOD,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("invalid channel config: {0}")]
    InvalidConfig(&'static str),
    #[error("no public key known for peer {0}")]
    NoKeyForPeer(NodeId),
    #[error("no private keys held for peer {0}")]
    UnknownPeer(NodeId),
    #[error("key epoch {epoch} from peer {peer} aged out (oldest retained {oldest})")]
    StaleKey { peer: NodeId, epoch: u64, oldest: u64 },
    #[error("key epoch {epoch} from peer {peer} was never issued")]
    UnknownEpoch { peer: NodeId, epoch: u64 },
    #[error("ciphertext failed authentication")]
    DecryptFailure,
    #[error("epoch {epoch} for peer {peer} does not advance past {last}")]
    NonMonotonicEpoch { peer: NodeId, epoch: u64, last: u64 },
    #[error("public key must be {PUBLIC_KEY_LEN} bytes, got {0}")]
    InvalidPublicKey(usize),
    #[error("plaintext of {0} bytes does not fit an envelope")]
    PayloadTooLarge(usize),
    #[error("unexpected message type {0:?}")]
    UnexpectedType(MsgType),
}
