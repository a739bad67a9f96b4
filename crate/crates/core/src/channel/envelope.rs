//! Binary framing for messages exchanged between node security modules.
//!
//! Layout, all integers big-endian:
//!
//! ```text
//! "CIS1" | version u8 | msg_type u8 | sender_id u32 | key_epoch u64
//!        | process_id_len u16 | process_id (UTF-8) | payload_len u32 | payload
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::NodeId;

pub const MAGIC: [u8; 4] = *b"CIS1";
pub const VERSION: u8 = 1;
/// Upper bound on `payload_len`.
pub const MAX_PAYLOAD: usize = 64 * 1024;
/// Bytes preceding the process id.
const FIXED_HEADER: usize = 4 + 1 + 1 + 4 + 8 + 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("truncated frame")]
    TruncatedFrame,
    #[error("unknown version {0}")]
    UnknownVersion(u8),
    #[error("unknown message type {0}")]
    UnknownMsgType(u8),
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD} byte limit")]
    PayloadTooLarge(usize),
    #[error("process id of {0} bytes does not fit the length field")]
    ProcessIdTooLong(usize),
    #[error("process id is not valid UTF-8")]
    InvalidProcessId,
    #[error("{0} trailing bytes after frame")]
    TrailingBytes(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum MsgType {
    KeyAnnounce = 1,
    FingerprintOffer = 2,
    Confirmation = 3,
    Alert = 4,
}

impl TryFrom<u8> for MsgType {
    type Error = CodecError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Ok(match value {
            1 => MsgType::KeyAnnounce,
            2 => MsgType::FingerprintOffer,
            3 => MsgType::Confirmation,
            4 => MsgType::Alert,
            other => return Err(CodecError::UnknownMsgType(other)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub version: u8,
    pub msg_type: MsgType,
    pub sender_id: NodeId,
    pub process_id: String,
    pub key_epoch: u64,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
}

impl Envelope {
    pub fn new(
        msg_type: MsgType,
        sender_id: NodeId,
        process_id: impl Into<String>,
        key_epoch: u64,
        payload: Vec<u8>,
    ) -> Self {
        Self {
            version: VERSION,
            msg_type,
            sender_id,
            process_id: process_id.into(),
            key_epoch,
            payload,
        }
    }

    /// Everything but the payload, as laid out on the wire. Bound into the
    /// ciphertext as associated data.
    pub fn header_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FIXED_HEADER + self.process_id.len());
        out.extend_from_slice(&MAGIC);
        out.push(self.version);
        out.push(self.msg_type as u8);
        out.extend_from_slice(&self.sender_id.0.to_be_bytes());
        out.extend_from_slice(&self.key_epoch.to_be_bytes());
        out.extend_from_slice(&(self.process_id.len() as u16).to_be_bytes());
        out.extend_from_slice(self.process_id.as_bytes());
        out
    }
}

pub fn encode_envelope(env: &Envelope) -> Result<Vec<u8>, CodecError> {
    if env.version != VERSION {
        return Err(CodecError::UnknownVersion(env.version));
    }
    if env.process_id.len() > u16::MAX as usize {
        return Err(CodecError::ProcessIdTooLong(env.process_id.len()));
    }
    if env.payload.len() > MAX_PAYLOAD {
        return Err(CodecError::PayloadTooLarge(env.payload.len()));
    }
    let mut out = env.header_bytes();
    out.reserve(4 + env.payload.len());
    out.extend_from_slice(&(env.payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&env.payload);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos.checked_add(n).ok_or(CodecError::TruncatedFrame)?;
        let out = self.buf.get(self.pos..end).ok_or(CodecError::TruncatedFrame)?;
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }
}

/// Decodes one frame from the front of `bytes`, returning it with the number
/// of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(Envelope, usize), CodecError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic = r.array::<4>()?;
    if magic != MAGIC {
        return Err(CodecError::BadMagic(magic));
    }
    let [version] = r.array::<1>()?;
    if version != VERSION {
        return Err(CodecError::UnknownVersion(version));
    }
    let [ty] = r.array::<1>()?;
    let msg_type = MsgType::try_from(ty)?;
    let sender_id = NodeId(u32::from_be_bytes(r.array()?));
    let key_epoch = u64::from_be_bytes(r.array()?);
    let pid_len = u16::from_be_bytes(r.array()?) as usize;
    let process_id = std::str::from_utf8(r.take(pid_len)?)
        .map_err(|_| CodecError::InvalidProcessId)?
        .to_string();
    let payload_len = u32::from_be_bytes(r.array()?) as usize;
    if payload_len > MAX_PAYLOAD {
        return Err(CodecError::PayloadTooLarge(payload_len));
    }
    let payload = r.take(payload_len)?.to_vec();
    let env = Envelope {
        version,
        msg_type,
        sender_id,
        process_id,
        key_epoch,
        payload,
    };
    Ok((env, r.pos))
}

/// Decodes exactly one frame; extra bytes are an error.
pub fn decode_envelope(bytes: &[u8]) -> Result<Envelope, CodecError> {
    let (env, used) = decode_frame(bytes)?;
    if used != bytes.len() {
        return Err(CodecError::TrailingBytes(bytes.len() - used));
    }
    Ok(env)
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}
