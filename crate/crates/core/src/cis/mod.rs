//! Per-node process profiling: listing parser, control-flow filter, the three
//! sequencers and the fingerprint generator.

mod classify;
mod parse;
mod profile;
mod stats;

pub use classify::{classify_mnemonic, mnemonics_of, ControlClass};
pub use parse::{parse_assembly, Instruction, ParseError, Program};
pub use profile::{
    extract_cis, fingerprint, hash_sequence, CisProfile, Digest, Fingerprint, ProfileOptions,
    TOKEN_DELIMITER,
};
pub use stats::{cfi_stats, CfiStats};

/// Parse, extract and fingerprint in one go.
pub fn profile_source(
    text: &str,
    process_id: &str,
    opts: ProfileOptions,
) -> Result<(Program, CisProfile, Fingerprint), ParseError> {
    let program = parse_assembly(text, process_id)?;
    let cis = extract_cis(&program, opts);
    let fp = fingerprint(&cis, process_id);
    Ok((program, cis, fp))
}
