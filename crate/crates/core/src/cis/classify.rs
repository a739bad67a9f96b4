use serde::{Deserialize, Serialize};

/// Control-flow class of an x86 mnemonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlClass {
    Jump,
    Call,
    Return,
    None,
}

impl ControlClass {
    pub fn is_control(self) -> bool {
        self != ControlClass::None
    }
}

const JUMPS: &[&str] = &[
    "jmp", // unconditional
    "ja", "jae", "jb", "jbe", "jc", "je", "jg", "jge", "jl", "jle", "jna", "jnae", "jnb", "jnbe",
    "jnc", "jne", "jng", "jnge", "jnl", "jnle", "jno", "jnp", "jns", "jnz", "jo", "jp", "jpe",
    "jpo", "js", "jz", // conditional
    "jcxz", "jecxz", "jrcxz", // counter tests
    "loop", "loope", "loopne", "loopnz", "loopz",
];

const CALLS: &[&str] = &["call", "callq", "lcall"];

const RETURNS: &[&str] = &["ret", "retq", "retn", "retf", "iret", "iretd", "iretq"];

/// Classifies a lowercase, trimmed mnemonic. Anything outside the
/// jump/call/return tables is [`ControlClass::None`].
pub fn classify_mnemonic(mnemonic: &str) -> ControlClass {
    if JUMPS.contains(&mnemonic) {
        ControlClass::Jump
    } else if CALLS.contains(&mnemonic) {
        ControlClass::Call
    } else if RETURNS.contains(&mnemonic) {
        ControlClass::Return
    } else {
        ControlClass::None
    }
}

/// All mnemonics recognised for a given control class.
pub fn mnemonics_of(class: ControlClass) -> &'static [&'static str] {
    match class {
        ControlClass::Jump => JUMPS,
        ControlClass::Call => CALLS,
        ControlClass::Return => RETURNS,
        ControlClass::None => &[],
    }
}
