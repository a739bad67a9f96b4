//! Line-level tampering of a node's copy of a listing.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatchError {
    #[error("position {pos} out of range for a {len}-line source")]
    PositionOutOfRange { pos: usize, len: usize },
    #[error("inserted line {0:?} contains a line break")]
    MultiLineInsertion(String),
}

/// A listing split into lines, remembering whether it ended with a newline so
/// rendering reproduces the original bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceText {
    pub lines: Vec<String>,
    pub trailing_newline: bool,
}

impl SourceText {
    pub fn parse(text: &str) -> Self {
        let trailing_newline = text.ends_with('\n');
        let body = if trailing_newline { &text[..text.len() - 1] } else { text };
        let lines = if text.is_empty() {
            Vec::new()
        } else {
            body.split('\n').map(str::to_string).collect()
        };
        Self {
            lines,
            trailing_newline,
        }
    }

    pub fn render(&self) -> String {
        let mut out = self.lines.join("\n");
        if self.trailing_newline {
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// Insertions and deletions against one node's copy of a process listing.
///
/// Positions index the original lines. An insertion at `pos` lands before
/// original line `pos` (`pos == len` appends); several insertions at the same
/// position keep their listed order. Deletions name original lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TamperPatch {
    #[serde(rename = "node", alias = "target_node")]
    pub target_node: NodeId,
    pub process_id: String,
    #[serde(default)]
    pub insertions: Vec<(usize, String)>,
    #[serde(default)]
    pub deletions: Vec<usize>,
}

/// What [`TamperPatch::apply`] changed, enough to undo it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppliedPatch {
    /// Indices of inserted lines in the patched text.
    pub inserted_at: Vec<usize>,
    /// Removed lines with their original indices.
    pub deleted: Vec<(usize, String)>,
}

impl TamperPatch {
    pub fn new(target_node: NodeId, process_id: impl Into<String>) -> Self {
        Self {
            target_node,
            process_id: process_id.into(),
            insertions: Vec::new(),
            deletions: Vec::new(),
        }
    }

    pub fn insert(mut self, pos: usize, line: impl Into<String>) -> Self {
        self.insertions.push((pos, line.into()));
        self
    }

    pub fn delete(mut self, pos: usize) -> Self {
        self.deletions.push(pos);
        self
    }

    /// A call to a function `foo` that prints a line: three calls and one
    /// return in total, inserted at `pos`.
    pub fn foo_call(target_node: NodeId, process_id: impl Into<String>, pos: usize) -> Self {
        let mut patch = Self::new(target_node, process_id);
        for line in foo_snippet() {
            patch = patch.insert(pos, line);
        }
        patch
    }

    pub fn is_empty(&self) -> bool {
        self.insertions.is_empty() && self.deletions.is_empty()
    }

    pub fn check(&self, len: usize) -> Result<(), PatchError> {
        for (pos, line) in &self.insertions {
            if *pos > len {
                return Err(PatchError::PositionOutOfRange { pos: *pos, len });
            }
            if line.contains(['\n', '\r']) {
                return Err(PatchError::MultiLineInsertion(line.clone()));
            }
        }
        if let Some(&pos) = self.deletions.iter().find(|p| **p >= len) {
            return Err(PatchError::PositionOutOfRange { pos, len });
        }
        Ok(())
    }

    pub fn apply(&self, source: &SourceText) -> Result<(SourceText, AppliedPatch), PatchError> {
        let len = source.len();
        self.check(len)?;
        let deletions: BTreeSet<usize> = self.deletions.iter().copied().collect();
        let mut inserts: Vec<(usize, usize, &str)> = self
            .insertions
            .iter()
            .enumerate()
            .map(|(order, (pos, line))| (*pos, order, line.as_str()))
            .collect();
        inserts.sort();

        let mut lines = Vec::with_capacity(len + inserts.len());
        let mut applied = AppliedPatch {
            inserted_at: Vec::new(),
            deleted: Vec::new(),
        };
        let mut next = inserts.iter().peekable();
        for i in 0..=len {
            while let Some((_, _, line)) = next.next_if(|(pos, _, _)| *pos == i) {
                applied.inserted_at.push(lines.len());
                lines.push(line.to_string());
            }
            if i == len {
                break;
            }
            if deletions.contains(&i) {
                applied.deleted.push((i, source.lines[i].clone()));
            } else {
                lines.push(source.lines[i].clone());
            }
        }
        let patched = SourceText {
            lines,
            trailing_newline: source.trailing_newline,
        };
        Ok((patched, applied))
    }
}

impl AppliedPatch {
    pub fn revert(&self, patched: &SourceText) -> SourceText {
        let inserted: BTreeSet<usize> = self.inserted_at.iter().copied().collect();
        let mut kept = patched
            .lines
            .iter()
            .enumerate()
            .filter(|(i, _)| !inserted.contains(i))
            .map(|(_, l)| l.clone());
        let total = patched.lines.len() - inserted.len() + self.deleted.len();
        let mut deleted = self.deleted.iter().peekable();
        let mut lines = Vec::with_capacity(total);
        for i in 0..total {
            match deleted.next_if(|(pos, _)| *pos == i) {
                Some((_, line)) => lines.push(line.clone()),
                None => lines.extend(kept.next()),
            }
        }
        SourceText {
            lines,
            trailing_newline: patched.trailing_newline,
        }
    }
}

/// Instruction lines for an injected call to `foo`, which prints a line.
pub fn foo_snippet() -> Vec<String> {
    [
        "call foo",
        "foo:",
        "push rbp",
        "mov rbp, rsp",
        "lea rdi, [rip+foo_msg]",
        "call puts",
        "mov rdi, qword ptr [rip+stdout]",
        "call fflush",
        "pop rbp",
        "ret",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}
