//! Line-oriented reader for Intel-syntax assembly listings as printed by a
//! JIT disassembler.
//!
//! An instruction line is an optional `0x<hex>:` address, a mnemonic token,
//! optional operand text and an optional trailing `;` or `#` comment.
//! Anything else (blank lines, comments, compile-log headers) is skipped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::classify::{classify_mnemonic, ControlClass};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    /// An address-prefixed line that carries no mnemonic. Line numbers are 1-based.
    #[error("malformed instruction at line {0}: address without mnemonic")]
    MalformedLine(usize),
}

/// Instruction prefixes that are folded into the following mnemonic.
const PREFIXES: &[&str] = &[
    "lock", "rep", "repe", "repz", "repne", "repnz", "bnd", "notrack",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub index: usize,
    pub mnemonic: String,
    pub operands: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    pub control_class: ControlClass,
}

impl Instruction {
    pub fn new(index: usize, mnemonic: &str, operands: &str) -> Self {
        let mnemonic = mnemonic.to_ascii_lowercase();
        Self {
            index,
            control_class: classify_mnemonic(&mnemonic),
            mnemonic,
            operands: operands.trim().to_string(),
            prefix: None,
        }
    }

    /// Operand text lowercased with whitespace collapsed and no spaces
    /// around commas.
    pub fn normalized_operands(&self) -> String {
        let lowered = self.operands.to_ascii_lowercase();
        let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
        collapsed
            .split(',')
            .map(str::trim)
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub process_id: String,
    pub instructions: Vec<Instruction>,
    pub source_path: String,
}

impl Program {
    pub fn new(process_id: impl Into<String>, instructions: Vec<Instruction>) -> Self {
        Self {
            process_id: process_id.into(),
            instructions,
            source_path: "<inline>".to_string(),
        }
    }

    pub fn with_source_path(mut self, path: impl Into<String>) -> Self {
        self.source_path = path.into();
        self
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }
}

enum Line<'a> {
    Skip,
    Malformed,
    Instruction {
        prefix: Option<&'a str>,
        mnemonic: &'a str,
        operands: &'a str,
    },
}

fn strip_comment(line: &str) -> &str {
    match line.find([';', '#']) {
        Some(at) => &line[..at],
        None => line,
    }
}

/// Splits `0x<hex>:` off the front of a line, returning the remainder.
fn strip_address(line: &str) -> Option<&str> {
    let rest = line.strip_prefix("0x")?;
    let hex_len = rest.bytes().take_while(u8::is_ascii_hexdigit).count();
    if hex_len == 0 {
        return None;
    }
    rest[hex_len..].strip_prefix(':')
}

fn looks_like_mnemonic(token: &str) -> bool {
    let mut bytes = token.bytes();
    matches!(bytes.next(), Some(b'a'..=b'z'))
        && bytes.all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
}

fn split_token(text: &str) -> (&str, &str) {
    match text.find(char::is_whitespace) {
        Some(at) => (&text[..at], text[at..].trim_start()),
        None => (text, ""),
    }
}

fn classify_line(raw: &str) -> Line<'_> {
    let body = strip_comment(raw).trim();
    if body.is_empty() {
        return Line::Skip;
    }
    let (addressed, rest) = match strip_address(body) {
        Some(rest) => (true, rest.trim()),
        None => (false, body),
    };
    if rest.is_empty() {
        return if addressed { Line::Malformed } else { Line::Skip };
    }
    let (mut mnemonic, mut operands) = split_token(rest);
    if !addressed && !looks_like_mnemonic(mnemonic) {
        return Line::Skip;
    }
    let mut prefix = None;
    if PREFIXES.contains(&mnemonic.to_ascii_lowercase().as_str()) && !operands.is_empty() {
        prefix = Some(mnemonic);
        (mnemonic, operands) = split_token(operands);
    }
    Line::Instruction {
        prefix,
        mnemonic,
        operands: operands.trim_end(),
    }
}

/// Parses a listing into a [`Program`], one instruction per recognised line.
pub fn parse_assembly(text: &str, process_id: &str) -> Result<Program, ParseError> {
    let mut instructions = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        match classify_line(raw) {
            Line::Skip => {}
            Line::Malformed => return Err(ParseError::MalformedLine(line_no + 1)),
            Line::Instruction {
                prefix,
                mnemonic,
                operands,
            } => {
                let mut instr = Instruction::new(instructions.len(), mnemonic, operands);
                instr.prefix = prefix.map(str::to_ascii_lowercase);
                instructions.push(instr);
            }
        }
    }
    Ok(Program::new(process_id, instructions))
}
