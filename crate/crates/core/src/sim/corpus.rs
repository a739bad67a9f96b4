//! Synthetic assembly listings with a controlled instruction-class mix.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cis::{mnemonics_of, ControlClass};

/// Instruction-class fractions. The remainder is non-control instructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstructionMix {
    pub jump: f64,
    pub call: f64,
    pub ret: f64,
}

impl InstructionMix {
    /// Average mix measured over the Hadoop MapReduce example programs.
    pub const HADOOP_AVERAGE: InstructionMix = InstructionMix {
        jump: 0.1545,
        call: 0.0481,
        ret: 0.0057,
    };

    pub fn cfi(&self) -> f64 {
        self.jump + self.call + self.ret
    }
}

impl Default for InstructionMix {
    fn default() -> Self {
        Self::HADOOP_AVERAGE
    }
}

/// The generator's own count of what it emitted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub total: usize,
    pub jumps: usize,
    pub calls: usize,
    pub returns: usize,
}

impl Tally {
    pub fn cfi(&self) -> usize {
        self.jumps + self.calls + self.returns
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedListing {
    pub text: String,
    pub tally: Tally,
}

const DATA_OPS: &[(&str, &str)] = &[
    ("mov", "rax, qword ptr [rsp+0x10]"),
    ("mov", "dword ptr [rbx+0xc], eax"),
    ("add", "rsp, 0x20"),
    ("sub", "rsp, 0x18"),
    ("lea", "rdx, [r12+0x10]"),
    ("push", "rbp"),
    ("pop", "rbp"),
    ("cmp", "r10d, r11d"),
    ("test", "eax, eax"),
    ("xor", "r8d, r8d"),
    ("and", "ecx, 0xff"),
    ("shl", "rdx, 0x3"),
    ("movzx", "eax, byte ptr [rsi+0x14]"),
    ("nop", ""),
    ("vmovdqu", "ymm0, ymmword ptr [rsi]"),
    ("lock cmpxchg", "qword ptr [rdx], rcx"),
];

fn emit(out: &mut String, addr: &mut u64, class: ControlClass, rng: &mut impl Rng) {
    let (mnemonic, operands): (&str, String) = match class {
        ControlClass::None => {
            let (m, o) = DATA_OPS.choose(rng).unwrap();
            (m, o.to_string())
        }
        ControlClass::Return => ("ret", String::new()),
        ControlClass::Call => ("call", format!("0x{:016x}", 0x7f00_0000_0000u64 + rng.gen_range(0..0xffff_ffu64))),
        ControlClass::Jump => {
            let m = mnemonics_of(ControlClass::Jump).choose(rng).unwrap();
            (m, format!("0x{:016x}", *addr + rng.gen_range(2..0x400u64)))
        }
    };
    let _ = write!(out, "  0x{:016x}: {mnemonic}", *addr);
    if !operands.is_empty() {
        let _ = write!(out, " {operands}");
    }
    if rng.gen_ratio(1, 16) {
        out.push_str(" ;*invokevirtual");
    }
    out.push('\n');
    *addr += rng.gen_range(1..8u64);
}

fn header(out: &mut String, rng: &mut impl Rng) {
    let _ = writeln!(out, "Decoding compiled method 0x{:016x}:", rng.gen::<u32>());
    out.push_str("Code:\n[Entry Point]\n[Constants]\n");
}

fn tally_of(classes: &[ControlClass]) -> Tally {
    let mut t = Tally {
        total: classes.len(),
        ..Default::default()
    };
    for c in classes {
        match c {
            ControlClass::Jump => t.jumps += 1,
            ControlClass::Call => t.calls += 1,
            ControlClass::Return => t.returns += 1,
            ControlClass::None => {}
        }
    }
    t
}

fn render(classes: &[ControlClass], rng: &mut impl Rng) -> String {
    let mut text = String::with_capacity(classes.len() * 48);
    header(&mut text, rng);
    let mut addr = 0x7f3c_2d0a_5c00u64;
    for (i, class) in classes.iter().enumerate() {
        if i > 0 && i % 500 == 0 {
            text.push_str("  ;; B: #\tN <- BLOCK HEAD\n\n");
        }
        emit(&mut text, &mut addr, *class, rng);
    }
    text
}

/// Draws each of `n` instructions independently from `mix`.
pub fn generate_listing(n: usize, mix: InstructionMix, rng: &mut impl Rng) -> GeneratedListing {
    let classes: Vec<ControlClass> = (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            if u < mix.jump {
                ControlClass::Jump
            } else if u < mix.jump + mix.call {
                ControlClass::Call
            } else if u < mix.cfi() {
                ControlClass::Return
            } else {
                ControlClass::None
            }
        })
        .collect();
    GeneratedListing {
        tally: tally_of(&classes),
        text: render(&classes, rng),
    }
}

/// Exactly the requested counts, shuffled.
pub fn generate_with_counts(tally: Tally, rng: &mut impl Rng) -> GeneratedListing {
    let others = tally.total.saturating_sub(tally.cfi());
    let mut classes = Vec::with_capacity(tally.cfi() + others);
    classes.extend(std::iter::repeat_n(ControlClass::Jump, tally.jumps));
    classes.extend(std::iter::repeat_n(ControlClass::Call, tally.calls));
    classes.extend(std::iter::repeat_n(ControlClass::Return, tally.returns));
    classes.extend(std::iter::repeat_n(ControlClass::None, others));
    classes.shuffle(rng);
    GeneratedListing {
        tally: tally_of(&classes),
        text: render(&classes, rng),
    }
}

/// A listing with `cfi` control instructions in the given mix proportions.
pub fn generate_for_cfi(cfi: usize, mix: InstructionMix, rng: &mut impl Rng) -> GeneratedListing {
    let total = (cfi as f64 / mix.cfi()).round() as usize;
    let calls = (cfi as f64 * mix.call / mix.cfi()).round() as usize;
    let returns = (cfi as f64 * mix.ret / mix.cfi()).round() as usize;
    let jumps = cfi - calls - returns;
    generate_with_counts(
        Tally {
            total: total.max(cfi),
            jumps,
            calls,
            returns,
        },
        rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cis::{cfi_stats, parse_assembly};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parsed_counts_match_tally() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = generate_listing(3000, InstructionMix::default(), &mut rng);
        let s = cfi_stats(&parse_assembly(&g.text, "g").unwrap());
        assert_eq!(s.total_instructions, g.tally.total);
        assert_eq!(s.jump_count, g.tally.jumps);
        assert_eq!(s.call_count, g.tally.calls);
        assert_eq!(s.return_count, g.tally.returns);
    }

    #[test]
    fn exact_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let want = Tally { total: 100, jumps: 10, calls: 5, returns: 2 };
        let g = generate_with_counts(want, &mut rng);
        assert_eq!(g.tally, want);
        let s = cfi_stats(&parse_assembly(&g.text, "g").unwrap());
        assert_eq!((s.total_instructions, s.cfi_count), (100, 17));
    }

    #[test]
    fn for_cfi_hits_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = generate_for_cfi(2000, InstructionMix::default(), &mut rng);
        assert_eq!(g.tally.cfi(), 2000);
        let frac = g.tally.cfi() as f64 / g.tally.total as f64;
        assert!((frac - 0.2083).abs() < 0.001, "{frac}");
    }
}
