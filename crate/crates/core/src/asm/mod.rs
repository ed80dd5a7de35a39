//! Parsing of GNU assembler (AT&T syntax) text into labeled blocks of
//! classified, operand-normalized instructions.

mod taxonomy;

pub use taxonomy::{Group, GroupTaxonomy, TaxonomyError, UnknownGroup};

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AsmError {
    #[error("line {line}: {reason}: `{text}`")]
    Malformed {
        line: usize,
        reason: &'static str,
        text: String,
    },
    #[error("line {line}: duplicate label `{label}`")]
    DuplicateLabel { line: usize, label: String },
    #[error("empty operand")]
    EmptyOperand,
}

impl AsmError {
    /// 1-based source line the error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            AsmError::Malformed { line, .. } | AsmError::DuplicateLabel { line, .. } => {
                Some(*line)
            }
            AsmError::EmptyOperand => None,
        }
    }
}

/// Control-transfer behavior of an instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstructionKind {
    CondJump,
    UncondJump,
    Call,
    Return,
    Other,
}

impl InstructionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InstructionKind::CondJump => "CondJump",
            InstructionKind::UncondJump => "UncondJump",
            InstructionKind::Call => "Call",
            InstructionKind::Return => "Return",
            InstructionKind::Other => "Other",
        }
    }

    pub fn is_jump(self) -> bool {
        matches!(self, InstructionKind::CondJump | InstructionKind::UncondJump)
    }

    pub fn is_transfer(self) -> bool {
        self.is_jump() || self == InstructionKind::Call
    }
}

impl fmt::Display for InstructionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the three operand symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperandSymbol {
    Name,
    Reg,
    Val,
}

impl OperandSymbol {
    pub fn as_str(self) -> &'static str {
        match self {
            OperandSymbol::Name => "name",
            OperandSymbol::Reg => "reg",
            OperandSymbol::Val => "val",
        }
    }
}

impl fmt::Display for OperandSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    /// 0-based position in the whole file.
    pub index: usize,
    pub mnemonic: String,
    pub operands: Vec<String>,
    pub kind: InstructionKind,
    /// Mnemonic followed by the normalized operands.
    pub normalized_symbols: Vec<String>,
    pub group: Group,
}

impl Instruction {
    /// Builds an instruction, deriving kind, group and normalized symbols.
    pub fn new(
        index: usize,
        mnemonic: impl Into<String>,
        operands: Vec<String>,
        taxonomy: &GroupTaxonomy,
    ) -> Result<Self, AsmError> {
        let mnemonic = mnemonic.into();
        let kind = classify_instruction(&mnemonic);
        let group = taxonomy.group_of(base_mnemonic(&mnemonic));
        let mut normalized_symbols = Vec::with_capacity(operands.len() + 1);
        normalized_symbols.push(mnemonic.clone());
        for op in &operands {
            normalized_symbols.push(normalize_operand(op)?.as_str().to_string());
        }
        Ok(Instruction {
            index,
            mnemonic,
            operands,
            kind,
            normalized_symbols,
            group,
        })
    }

    /// Target label of a direct jump or call, `None` for indirect transfers
    /// and non-transfers. A trailing `@PLT` is dropped.
    pub fn direct_target(&self) -> Option<&str> {
        if !self.kind.is_transfer() {
            return None;
        }
        let op = self.operands.first()?;
        if op.starts_with('*') || op.contains('%') {
            return None;
        }
        Some(op.strip_suffix("@PLT").unwrap_or(op))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// Empty for the block of code preceding the first label.
    pub label: String,
    pub instructions: Vec<Instruction>,
}

const PREFIXES: &[&str] = &["rep", "repe", "repz", "repne", "repnz", "lock"];
const HINTS: &[&str] = &["notrack", "bnd"];

fn base_mnemonic(mnemonic: &str) -> &str {
    mnemonic.rsplit(' ').next().unwrap_or(mnemonic)
}

/// Classifies a mnemonic by its control-transfer behavior.
///
/// For prefixed forms such as `rep stosq` only the final word counts.
pub fn classify_instruction(mnemonic: &str) -> InstructionKind {
    let m = base_mnemonic(mnemonic).to_ascii_lowercase();
    match m.as_str() {
        "jmp" | "jmpq" | "jmpl" | "jmpw" | "ljmp" | "ljmpq" | "ljmpl" => {
            InstructionKind::UncondJump
        }
        "call" | "callq" | "calll" | "callw" | "lcall" => InstructionKind::Call,
        _ if m.starts_with('j') => InstructionKind::CondJump,
        _ if m.starts_with("ret") => InstructionKind::Return,
        _ => InstructionKind::Other,
    }
}

fn is_numeric_literal(s: &str) -> bool {
    let s = s.strip_prefix(['-', '+']).unwrap_or(s);
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        return !hex.is_empty() && hex.chars().all(|c| c.is_ascii_hexdigit());
    }
    !s.is_empty() && s.chars().all(|c| c.is_ascii_digit())
}

/// Maps one operand to `name`, `reg` or `val`.
///
/// Anything mentioning a register (including memory operands such as
/// `-8(%rbp)`) is `reg`; immediates and bare numeric literals are `val`;
/// remaining identifiers are `name`.
pub fn normalize_operand(operand: &str) -> Result<OperandSymbol, AsmError> {
    let op = operand.trim();
    if op.is_empty() {
        return Err(AsmError::EmptyOperand);
    }
    Ok(if op.contains('%') {
        OperandSymbol::Reg
    } else if op.starts_with('$') || is_numeric_literal(op) {
        OperandSymbol::Val
    } else {
        OperandSymbol::Name
    })
}

/// `[mnemonic] ++ normalized operands`.
pub fn tokenize_instruction(inst: &Instruction) -> Vec<String> {
    let mut out = Vec::with_capacity(inst.operands.len() + 1);
    out.push(inst.mnemonic.clone());
    out.extend(
        inst.operands
            .iter()
            .map(|op| normalize_operand(op).map_or("name", |s| s.as_str()).to_string()),
    );
    out
}

fn split_operands(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for c in text.chars() {
        match c {
            '(' => {
                depth += 1;
                current.push(c);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                current.push(c);
            }
            ',' if depth == 0 => {
                out.push(current.trim().to_string());
                current.clear();
            }
            _ => current.push(c),
        }
    }
    out.push(current.trim().to_string());
    out
}

fn is_label_name(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$' | '@'))
}

fn is_mnemonic(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Splits `text` at a leading label, returning `(label, rest)`.
fn leading_label(text: &str) -> Option<(&str, &str)> {
    let colon = text.find(':')?;
    let candidate = &text[..colon];
    is_label_name(candidate).then(|| (candidate, text[colon + 1..].trim_start()))
}

/// Parses assembly text into blocks, classifying instruction kinds and
/// groups with the default [`GroupTaxonomy`].
pub fn parse_assembly(text: &str) -> Result<Vec<Block>, AsmError> {
    parse_assembly_with(text, &GroupTaxonomy::default())
}

pub fn parse_assembly_with(text: &str, taxonomy: &GroupTaxonomy) -> Result<Vec<Block>, AsmError> {
    let mut blocks: Vec<Block> = Vec::new();
    let mut seen_labels = HashSet::new();
    let mut index = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let mut rest = strip_comment(raw).trim();
        // a line may carry several labels before an instruction
        while let Some((label, after)) = leading_label(rest) {
            if !seen_labels.insert(label.to_string()) {
                return Err(AsmError::DuplicateLabel {
                    line,
                    label: label.to_string(),
                });
            }
            blocks.push(Block {
                label: label.to_string(),
                instructions: Vec::new(),
            });
            rest = after;
        }
        if rest.is_empty() || rest.starts_with('.') {
            continue;
        }
        let malformed = |reason| AsmError::Malformed {
            line,
            reason,
            text: raw.trim().to_string(),
        };

        let mut words = rest.splitn(2, char::is_whitespace);
        let mut mnemonic = words.next().unwrap_or_default().to_string();
        let mut remainder = words.next().unwrap_or_default().trim();
        loop {
            let lower = mnemonic.to_ascii_lowercase();
            let (is_hint, is_prefix) = (
                HINTS.contains(&lower.as_str()),
                PREFIXES.contains(&lower.as_str()),
            );
            if !(is_hint || is_prefix) || remainder.is_empty() {
                break;
            }
            let mut next = remainder.splitn(2, char::is_whitespace);
            let word = next.next().unwrap_or_default();
            if !is_mnemonic(word) {
                break;
            }
            mnemonic = if is_hint {
                word.to_string()
            } else {
                format!("{mnemonic} {word}")
            };
            remainder = next.next().unwrap_or_default().trim();
        }
        if !mnemonic.split(' ').all(is_mnemonic) {
            return Err(malformed("no parseable mnemonic"));
        }

        let operands = if remainder.is_empty() {
            Vec::new()
        } else {
            split_operands(remainder)
        };
        if operands.iter().any(String::is_empty) {
            return Err(malformed("empty operand"));
        }
        let inst = Instruction::new(index, mnemonic, operands, taxonomy)
            .map_err(|_| malformed("empty operand"))?;
        if inst.kind.is_transfer() && inst.operands.is_empty() {
            return Err(malformed("control transfer without a target"));
        }
        index += 1;

        match blocks.last_mut() {
            Some(block) => block.instructions.push(inst),
            None => blocks.push(Block {
                label: String::new(),
                instructions: vec![inst],
            }),
        }
    }
    Ok(blocks)
}

impl FromStr for InstructionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "CondJump" => Ok(InstructionKind::CondJump),
            "UncondJump" => Ok(InstructionKind::UncondJump),
            "Call" => Ok(InstructionKind::Call),
            "Return" => Ok(InstructionKind::Return),
            "Other" => Ok(InstructionKind::Other),
            other => Err(format!("unknown instruction kind `{other}`")),
        }
    }
}
