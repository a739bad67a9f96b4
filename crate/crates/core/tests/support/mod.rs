//! Independent reference implementations used as test oracles, and shared
//! helpers for the integration suites.

#![allow(dead_code)]

use std::io::Write;

/// Prints a verdict line straight to stderr so it shows even when the test
/// harness captures output.
pub fn report(criterion: u32, pass: bool, detail: impl std::fmt::Display) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {criterion}: {verdict} {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

// ---- SHA-256, straight from the FIPS 180-4 description ----

const K: [u32; 64] = [
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
];

const H0: [u32; 8] = [
    0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
];

pub fn sha256(message: &[u8]) -> [u8; 32] {
    let bit_len = (message.len() as u64).wrapping_mul(8);
    let mut padded = message.to_vec();
    padded.push(0x80);
    while padded.len() % 64 != 56 {
        padded.push(0);
    }
    padded.extend_from_slice(&bit_len.to_be_bytes());

    let mut h = H0;
    for block in padded.chunks_exact(64) {
        let mut w = [0u32; 64];
        for t in 0..16 {
            w[t] = u32::from_be_bytes([block[4 * t], block[4 * t + 1], block[4 * t + 2], block[4 * t + 3]]);
        }
        for t in 16..64 {
            let s0 = w[t - 15].rotate_right(7) ^ w[t - 15].rotate_right(18) ^ (w[t - 15] >> 3);
            let s1 = w[t - 2].rotate_right(17) ^ w[t - 2].rotate_right(19) ^ (w[t - 2] >> 10);
            w[t] = w[t - 16]
                .wrapping_add(s0)
                .wrapping_add(w[t - 7])
                .wrapping_add(s1);
        }
        let [mut a, mut b, mut c, mut d, mut e, mut f, mut g, mut hh] = h;
        for t in 0..64 {
            let big_s1 = e.rotate_right(6) ^ e.rotate_right(11) ^ e.rotate_right(25);
            let ch = (e & f) ^ (!e & g);
            let t1 = hh
                .wrapping_add(big_s1)
                .wrapping_add(ch)
                .wrapping_add(K[t])
                .wrapping_add(w[t]);
            let big_s0 = a.rotate_right(2) ^ a.rotate_right(13) ^ a.rotate_right(22);
            let maj = (a & b) ^ (a & c) ^ (b & c);
            let t2 = big_s0.wrapping_add(maj);
            hh = g;
            g = f;
            f = e;
            e = d.wrapping_add(t1);
            d = c;
            c = b;
            b = a;
            a = t1.wrapping_add(t2);
        }
        for (slot, v) in h.iter_mut().zip([a, b, c, d, e, f, g, hh]) {
            *slot = slot.wrapping_add(v);
        }
    }
    let mut out = [0u8; 32];
    for (chunk, word) in out.chunks_exact_mut(4).zip(h) {
        chunk.copy_from_slice(&word.to_be_bytes());
    }
    out
}

// ---- a second, brute-force listing reader ----

const ORACLE_JUMPS: &str = "jmp ja jae jb jbe jc je jg jge jl jle jna jnae jnb jnbe jnc jne jng \
    jnge jnl jnle jno jnp jns jnz jo jp jpe jpo js jz jcxz jecxz jrcxz loop loope loopne loopnz loopz";
const ORACLE_CALLS: &str = "call callq lcall";
const ORACLE_RETURNS: &str = "ret retq retn retf iret iretd iretq";
const ORACLE_PREFIXES: &str = "lock rep repe repz repne repnz bnd notrack";

fn in_list(list: &str, word: &str) -> bool {
    list.split(' ').filter(|w| !w.is_empty()).any(|w| w == word)
}

/// Mnemonic of an instruction line, lowercased, or `None` for lines that
/// carry no instruction.
pub fn oracle_mnemonic(line: &str) -> Option<String> {
    let mut body = String::new();
    for ch in line.chars() {
        if ch == ';' || ch == '#' {
            break;
        }
        body.push(ch);
    }
    let mut words: Vec<&str> = body.split_whitespace().collect();
    if words.is_empty() {
        return None;
    }
    let mut addressed = false;
    let first = words[0];
    if let Some(colon) = first.find(':') {
        let addr = &first[..colon];
        if addr.len() > 2 && addr.starts_with("0x") && addr[2..].chars().all(|c| c.is_ascii_hexdigit()) {
            addressed = true;
            let tail = &first[colon + 1..];
            if tail.is_empty() {
                words.remove(0);
            } else {
                words[0] = tail;
            }
        }
    }
    if words.is_empty() {
        return None;
    }
    if !addressed {
        let w = words[0];
        let ok = w.chars().next().is_some_and(|c| c.is_ascii_lowercase())
            && w.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit());
        if !ok {
            return None;
        }
    }
    let mut mnemonic = words[0].to_ascii_lowercase();
    if words.len() > 1 && in_list(ORACLE_PREFIXES, &mnemonic) {
        mnemonic = words[1].to_ascii_lowercase();
    }
    Some(mnemonic)
}

/// Combined digest of a listing computed without the library: re-parse,
/// re-filter and re-hash.
pub fn oracle_combined(listing: &str) -> [u8; 32] {
    let mut jumps = Vec::new();
    let mut calls = Vec::new();
    let mut returns = Vec::new();
    for line in listing.lines() {
        let Some(m) = oracle_mnemonic(line) else { continue };
        if in_list(ORACLE_JUMPS, &m) {
            jumps.push(m);
        } else if in_list(ORACLE_CALLS, &m) {
            calls.push(m);
        } else if in_list(ORACLE_RETURNS, &m) {
            returns.push(m);
        }
    }
    let mut cat = Vec::with_capacity(96);
    for seq in [&jumps, &calls, &returns] {
        cat.extend_from_slice(&sha256(seq.join("\n").as_bytes()));
    }
    sha256(&cat)
}

pub fn is_control_line(line: &str) -> bool {
    oracle_mnemonic(line).is_some_and(|m| {
        in_list(ORACLE_JUMPS, &m) || in_list(ORACLE_CALLS, &m) || in_list(ORACLE_RETURNS, &m)
    })
}

pub fn control_mnemonics() -> Vec<&'static str> {
    [ORACLE_JUMPS, ORACLE_CALLS, ORACLE_RETURNS]
        .iter()
        .flat_map(|l| l.split_whitespace())
        .collect()
}

#[test]
fn oracle_sha_matches_known_vectors() {
    let hex = |d: [u8; 32]| d.iter().map(|b| format!("{b:02x}")).collect::<String>();
    assert_eq!(
        hex(sha256(b"")),
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    );
    assert_eq!(
        hex(sha256(b"jmp\njne")),
        "19891f5c11e3e27afd29f21fb2dc73a58c1a5b6f2bdf3c9ea788c6ebe832dcba"
    );
    assert_eq!(
        hex(sha256(&[b'a'; 1000])),
        "41edece42d63e8d9bf515a9ba6932e1c20cbc9f5a5d134645adb5db1b9737ea3"
    );
}
