use serde::{Deserialize, Serialize};

use super::classify::ControlClass;
use super::parse::Program;

/// Instruction-mix counts for one program.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CfiStats {
    pub total_instructions: usize,
    pub cfi_count: usize,
    pub jump_count: usize,
    pub call_count: usize,
    pub return_count: usize,
    pub cfi_fraction: f64,
    pub jump_fraction: f64,
    pub call_fraction: f64,
    pub return_fraction: f64,
}

impl CfiStats {
    pub fn from_counts(total: usize, jumps: usize, calls: usize, returns: usize) -> Self {
        let frac = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
        let cfi = jumps + calls + returns;
        Self {
            total_instructions: total,
            cfi_count: cfi,
            jump_count: jumps,
            call_count: calls,
            return_count: returns,
            cfi_fraction: frac(cfi),
            jump_fraction: frac(jumps),
            call_fraction: frac(calls),
            return_fraction: frac(returns),
        }
    }

    /// Pooled statistics over several programs (ratio of summed counts).
    pub fn pooled<'a>(items: impl IntoIterator<Item = &'a CfiStats>) -> Self {
        let (mut t, mut j, mut c, mut r) = (0, 0, 0, 0);
        for s in items {
            t += s.total_instructions;
            j += s.jump_count;
            c += s.call_count;
            r += s.return_count;
        }
        Self::from_counts(t, j, c, r)
    }
}

pub fn cfi_stats(program: &Program) -> CfiStats {
    let (mut j, mut c, mut r) = (0, 0, 0);
    for instr in &program.instructions {
        match instr.control_class {
            ControlClass::Jump => j += 1,
            ControlClass::Call => c += 1,
            ControlClass::Return => r += 1,
            ControlClass::None => {}
        }
    }
    CfiStats::from_counts(program.len(), j, c, r)
}
