//! Text in, text out: the grammar parser, the sentence generator and the
//! two-extractor translation loop.

mod extract;
mod generate;
mod grammar;

pub use extract::{
    extract_canonical, BackendError, ExtractionError, ExtractionReader, ExtractionRecord,
    ExtractorBackend, GrammarBackend, GrammarReader, PathReader, ReadError, RetryBudget,
    TurnPoints, TurnSide, ZeroBudget,
};
pub use generate::generate_instruction;
pub use grammar::{parse_instruction, ParseError};

/// An instruction and the 1-based line it starts on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionEntry {
    pub line: usize,
    pub text: String,
}

/// Splits an instruction file. If any blank line separates two non-blank
/// lines, each blank-line-separated block is one instruction (its lines
/// joined by spaces); otherwise each non-blank line is one instruction.
pub fn split_instructions(contents: &str) -> Vec<InstructionEntry> {
    let lines: Vec<&str> = contents.lines().collect();
    let first = lines.iter().position(|l| !l.trim().is_empty());
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let block_mode = match (first, last) {
        (Some(f), Some(l)) => lines[f..=l].iter().any(|x| x.trim().is_empty()),
        _ => false,
    };
    let mut out: Vec<InstructionEntry> = Vec::new();
    let mut current: Option<InstructionEntry> = None;
    for (i, raw) in lines.iter().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            out.extend(current.take());
            continue;
        }
        if !block_mode {
            out.push(InstructionEntry { line: i + 1, text: line.to_string() });
            continue;
        }
        match &mut current {
            Some(entry) => {
                entry.text.push(' ');
                entry.text.push_str(line);
            }
            None => current = Some(InstructionEntry { line: i + 1, text: line.to_string() }),
        }
    }
    out.extend(current);
    out
}
