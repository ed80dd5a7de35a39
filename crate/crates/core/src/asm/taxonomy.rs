//! Coarse instruction groups used as the second vertex view.
//!
//! Groups are assigned by longest-prefix match of the (lower-cased)
//! mnemonic against a rule table. The default table covers the mnemonic
//! families gcc emits at `-O0`; a replacement table can be loaded from a
//! `prefix<TAB>group` text file.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The closed set of instruction groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Group {
    CondJump,
    UncondJump,
    Call,
    Return,
    Move,
    Arithmetic,
    Logic,
    Compare,
    Stack,
    Convert,
    Lea,
    Other,
}

impl Group {
    pub const ALL: [Group; 12] = [
        Group::CondJump,
        Group::UncondJump,
        Group::Call,
        Group::Return,
        Group::Move,
        Group::Arithmetic,
        Group::Logic,
        Group::Compare,
        Group::Stack,
        Group::Convert,
        Group::Lea,
        Group::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::CondJump => "cond-jump",
            Group::UncondJump => "uncond-jump",
            Group::Call => "call",
            Group::Return => "return",
            Group::Move => "move",
            Group::Arithmetic => "arithmetic",
            Group::Logic => "logic",
            Group::Compare => "compare",
            Group::Stack => "stack",
            Group::Convert => "convert",
            Group::Lea => "lea",
            Group::Other => "other",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown instruction group `{0}`")]
pub struct UnknownGroup(pub String);

impl FromStr for Group {
    type Err = UnknownGroup;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Group::ALL
            .iter()
            .copied()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| UnknownGroup(s.to_string()))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("taxonomy line {line}: expected `prefix<TAB>group`")]
    Malformed { line: usize },
    #[error("taxonomy line {line}: {source}")]
    Group {
        line: usize,
        #[source]
        source: UnknownGroup,
    },
}

const DEFAULT_RULES: &[(&str, Group)] = &[
    ("j", Group::CondJump),
    ("jmp", Group::UncondJump),
    ("ljmp", Group::UncondJump),
    ("call", Group::Call),
    ("ret", Group::Return),
    ("mov", Group::Move),
    ("cmov", Group::Move),
    ("xchg", Group::Move),
    ("rep", Group::Move),
    ("stos", Group::Move),
    ("lods", Group::Move),
    ("add", Group::Arithmetic),
    ("adc", Group::Arithmetic),
    ("sub", Group::Arithmetic),
    ("sbb", Group::Arithmetic),
    ("imul", Group::Arithmetic),
    ("mul", Group::Arithmetic),
    ("idiv", Group::Arithmetic),
    ("div", Group::Arithmetic),
    ("inc", Group::Arithmetic),
    ("dec", Group::Arithmetic),
    ("neg", Group::Arithmetic),
    ("sqrt", Group::Arithmetic),
    ("and", Group::Logic),
    ("or", Group::Logic),
    ("xor", Group::Logic),
    ("not", Group::Logic),
    ("shl", Group::Logic),
    ("shr", Group::Logic),
    ("sal", Group::Logic),
    ("sar", Group::Logic),
    ("rol", Group::Logic),
    ("ror", Group::Logic),
    ("pxor", Group::Logic),
    ("pand", Group::Logic),
    ("por", Group::Logic),
    ("cmp", Group::Compare),
    ("test", Group::Compare),
    ("set", Group::Compare),
    ("comis", Group::Compare),
    ("ucomis", Group::Compare),
    ("push", Group::Stack),
    ("pop", Group::Stack),
    ("leave", Group::Stack),
    ("enter", Group::Stack),
    ("cvt", Group::Convert),
    ("cltq", Group::Convert),
    ("cltd", Group::Convert),
    ("cqto", Group::Convert),
    ("cwtl", Group::Convert),
    ("cbtw", Group::Convert),
    ("cdq", Group::Convert),
    ("cqo", Group::Convert),
    ("cwd", Group::Convert),
    ("lea", Group::Lea),
];

/// Longest-prefix rule table mapping mnemonics to [`Group`]s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupTaxonomy {
    // sorted by descending prefix length, then lexicographically
    rules: Vec<(String, Group)>,
}

impl Default for GroupTaxonomy {
    fn default() -> Self {
        Self::from_rules(
            DEFAULT_RULES
                .iter()
                .map(|(p, g)| (p.to_string(), *g))
                .collect(),
        )
    }
}

impl GroupTaxonomy {
    pub fn from_rules(mut rules: Vec<(String, Group)>) -> Self {
        rules.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        rules.dedup_by(|a, b| a.0 == b.0);
        GroupTaxonomy { rules }
    }

    /// Parses a `prefix<TAB>group` table. Blank lines and lines starting
    /// with `#` are ignored. Later rules for the same prefix win.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut rules: Vec<(String, Group)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(prefix), Some(group), None) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(TaxonomyError::Malformed { line: i + 1 });
            };
            let prefix = prefix.trim().to_ascii_lowercase();
            if prefix.is_empty() {
                return Err(TaxonomyError::Malformed { line: i + 1 });
            }
            let group = group
                .trim()
                .parse()
                .map_err(|source| TaxonomyError::Group { line: i + 1, source })?;
            rules.retain(|(p, _)| *p != prefix);
            rules.push((prefix, group));
        }
        Ok(Self::from_rules(rules))
    }

    /// Renders the table in the format accepted by [`GroupTaxonomy::parse`].
    pub fn to_table(&self) -> String {
        let mut rules = self.rules.clone();
        rules.sort_by(|a, b| a.0.cmp(&b.0));
        rules
            .iter()
            .map(|(p, g)| format!("{p}\t{g}\n"))
            .collect()
    }

    pub fn group_of(&self, mnemonic: &str) -> Group {
        let m = mnemonic.to_ascii_lowercase();
        self.rules
            .iter()
            .find(|(p, _)| m.starts_with(p.as_str()))
            .map(|(_, g)| *g)
            .unwrap_or(Group::Other)
    }
}
