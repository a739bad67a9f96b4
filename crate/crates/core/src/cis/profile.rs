//! Control instruction sequences and the hash-of-hashes fingerprint.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use super::classify::ControlClass;
use super::parse::{Instruction, Program};

/// Byte separating tokens in the canonical sequence serialization.
pub const TOKEN_DELIMITER: u8 = b'\n';

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileOptions {
    /// Append normalized operand text to each token. Off by default because
    /// JIT output embeds addresses that differ between replicas.
    #[serde(default)]
    pub include_operands: bool,
}

/// The jump, call and return token sequences of one program, in program order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CisProfile {
    pub jumps: Vec<String>,
    pub calls: Vec<String>,
    pub returns: Vec<String>,
}

impl CisProfile {
    pub fn sequence(&self, class: ControlClass) -> &[String] {
        match class {
            ControlClass::Jump => &self.jumps,
            ControlClass::Call => &self.calls,
            ControlClass::Return => &self.returns,
            ControlClass::None => &[],
        }
    }

    pub fn total_len(&self) -> usize {
        self.jumps.len() + self.calls.len() + self.returns.len()
    }
}

fn token_of(instr: &Instruction, opts: ProfileOptions) -> String {
    if opts.include_operands && !instr.operands.is_empty() {
        format!("{} {}", instr.mnemonic, instr.normalized_operands())
    } else {
        instr.mnemonic.clone()
    }
}

/// Single pass over the program, routing each control instruction's token to
/// its sequence.
pub fn extract_cis(program: &Program, opts: ProfileOptions) -> CisProfile {
    let mut profile = CisProfile::default();
    for instr in &program.instructions {
        let seq = match instr.control_class {
            ControlClass::Jump => &mut profile.jumps,
            ControlClass::Call => &mut profile.calls,
            ControlClass::Return => &mut profile.returns,
            ControlClass::None => continue,
        };
        seq.push(token_of(instr, opts));
    }
    profile
}

/// A SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Digest(out))
    }

    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// SHA-256 over the tokens joined by [`TOKEN_DELIMITER`]. The empty sequence
/// hashes the empty string.
pub fn hash_sequence<S: AsRef<str>>(seq: &[S]) -> Digest {
    let mut hasher = Sha256::new();
    for (i, token) in seq.iter().enumerate() {
        if i > 0 {
            hasher.update([TOKEN_DELIMITER]);
        }
        hasher.update(token.as_ref().as_bytes());
    }
    Digest(hasher.finalize().into())
}

/// Identifies one process run: the three per-sequence digests and the digest
/// over their concatenation. `process_id` is carried as metadata only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub process_id: String,
    pub jump_digest: Digest,
    pub call_digest: Digest,
    pub return_digest: Digest,
    pub combined: Digest,
}

impl Fingerprint {
    pub fn from_parts(process_id: &str, jump: Digest, call: Digest, ret: Digest) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(jump.0);
        hasher.update(call.0);
        hasher.update(ret.0);
        Self {
            process_id: process_id.to_string(),
            jump_digest: jump,
            call_digest: call,
            return_digest: ret,
            combined: Digest(hasher.finalize().into()),
        }
    }
}

pub fn fingerprint(profile: &CisProfile, process_id: &str) -> Fingerprint {
    Fingerprint::from_parts(
        process_id,
        hash_sequence(&profile.jumps),
        hash_sequence(&profile.calls),
        hash_sequence(&profile.returns),
    )
}
