//! Hybrid public-key encryption: an ephemeral X25519 agreement with the
//! recipient's epoch key, HKDF-SHA256 key derivation and ChaCha20-Poly1305.
//!
//! Sealed layout: `ephemeral_public (32) | ciphertext | tag (16)`.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use hkdf::Hkdf;
use rand_core::CryptoRngCore;
use sha2::Sha256;
use x25519_dalek::{PublicKey, StaticSecret};

pub const PUBLIC_KEY_LEN: usize = 32;
pub const SEAL_OVERHEAD: usize = PUBLIC_KEY_LEN + 16;

const KDF_INFO: &[u8] = b"cisguard sealed envelope v1";

fn derive_key(shared: &[u8; 32], ephemeral: &PublicKey, recipient: &PublicKey) -> Key {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(ephemeral.as_bytes());
    salt[32..].copy_from_slice(recipient.as_bytes());
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared);
    let mut okm = [0u8; 32];
    hk.expand(KDF_INFO, &mut okm)
        .expect("32 bytes is a valid HKDF-SHA256 output length");
    Key::from(okm)
}

/// Every sealed message uses a fresh ephemeral key, so the derived AEAD key is
/// single-use and a constant nonce is sound.
const NONCE: [u8; 12] = [0u8; 12];

pub fn seal(
    recipient: &PublicKey,
    aad: &[u8],
    plaintext: &[u8],
    rng: &mut impl CryptoRngCore,
) -> Vec<u8> {
    let ephemeral = StaticSecret::random_from_rng(&mut *rng);
    let ephemeral_pub = PublicKey::from(&ephemeral);
    let shared = ephemeral.diffie_hellman(recipient);
    let key = derive_key(shared.as_bytes(), &ephemeral_pub, recipient);
    let ct = ChaCha20Poly1305::new(&key)
        .encrypt(Nonce::from_slice(&NONCE), Payload { msg: plaintext, aad })
        .expect("in-memory encryption does not fail");
    let mut out = Vec::with_capacity(SEAL_OVERHEAD + plaintext.len());
    out.extend_from_slice(ephemeral_pub.as_bytes());
    out.extend_from_slice(&ct);
    out
}

/// Returns `None` when the ciphertext, associated data or key do not match.
pub fn open(secret: &StaticSecret, aad: &[u8], sealed: &[u8]) -> Option<Vec<u8>> {
    if sealed.len() < SEAL_OVERHEAD {
        return None;
    }
    let (eph, ct) = sealed.split_at(PUBLIC_KEY_LEN);
    let ephemeral_pub = PublicKey::from(<[u8; 32]>::try_from(eph).ok()?);
    let shared = secret.diffie_hellman(&ephemeral_pub);
    if !shared.was_contributory() {
        return None;
    }
    let key = derive_key(shared.as_bytes(), &ephemeral_pub, &PublicKey::from(secret));
    ChaCha20Poly1305::new(&key)
        .decrypt(Nonce::from_slice(&NONCE), Payload { msg: ct, aad })
        .ok()
}
