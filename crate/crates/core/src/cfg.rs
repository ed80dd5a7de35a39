//! Instruction-level control flow graph construction.
//!
//! Vertices are instructions in file order. Edges come from four rules:
//! sequential fallthrough (within and across blocks), direct jumps to the
//! first instruction of the target block, and a pair of edges per direct
//! call into a local block (call site to callee entry, callee block end to
//! the instruction after the call). Targets that do not resolve to a block
//! in the file (library routines, indirect transfers) contribute no edge.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asm::{self, AsmError, Block, Group, GroupTaxonomy, Instruction, InstructionKind};

/// How fallthrough edges are treated after unconditional transfers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum EdgeMode {
    /// Every instruction falls through to its lexical successor.
    #[default]
    Faithful,
    /// No fallthrough out of `UncondJump` or `Return` instructions.
    Strict,
}

impl EdgeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeMode::Faithful => "faithful",
            EdgeMode::Strict => "strict",
        }
    }

    /// Whether a fallthrough edge leaves an instruction of this kind.
    pub fn falls_through(self, kind: InstructionKind) -> bool {
        match self {
            EdgeMode::Faithful => true,
            EdgeMode::Strict => !matches!(kind, InstructionKind::UncondJump | InstructionKind::Return),
        }
    }
}

impl fmt::Display for EdgeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "faithful" => Ok(EdgeMode::Faithful),
            "strict" => Ok(EdgeMode::Strict),
            other => Err(format!("unknown edge mode `{other}` (expected faithful|strict)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Fallthrough,
    Jump,
    CallEntry,
    CallReturn,
}

impl Provenance {
    // When two rules produce the same (from, to) pair the higher rank is kept.
    fn rank(self) -> u8 {
        match self {
            Provenance::Fallthrough => 0,
            Provenance::CallReturn => 1,
            Provenance::Jump => 2,
            Provenance::CallEntry => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub provenance: Provenance,
}

/// Predecessor and successor lists of a directed graph, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Topology {
    pub preds: Vec<Vec<usize>>,
    pub succs: Vec<Vec<usize>>,
}

impl Topology {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for (from, to) in edges {
            succs[from].push(to);
            preds[to].push(from);
        }
        for list in preds.iter_mut().chain(succs.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        Topology { preds, succs }
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge ({from}, {to}) references a vertex outside 0..{n}")]
    EdgeOutOfRange { from: usize, to: usize, n: usize },
    #[error("vertex at position {position} carries index {index}")]
    VertexOrder { position: usize, index: usize },
    #[error("duplicate edge ({from}, {to})")]
    DuplicateEdge { from: usize, to: usize },
    #[error("malformed graph json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("vertex {index}: {reason}")]
    Vertex { index: usize, reason: String },
}

/// Directed graph over instructions in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlFlowGraph {
    vertices: Vec<Instruction>,
    // sorted by (from, to), unique pairs
    edges: Vec<Edge>,
    topology: Topology,
}

impl ControlFlowGraph {
    pub fn new(vertices: Vec<Instruction>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        let n = vertices.len();
        for (position, v) in vertices.iter().enumerate() {
            if v.index != position {
                return Err(GraphError::VertexOrder {
                    position,
                    index: v.index,
                });
            }
        }
        let mut edges = edges;
        edges.sort_by_key(|e| (e.from, e.to));
        for pair in edges.windows(2) {
            if (pair[0].from, pair[0].to) == (pair[1].from, pair[1].to) {
                return Err(GraphError::DuplicateEdge {
                    from: pair[0].from,
                    to: pair[0].to,
                });
            }
        }
        if let Some(e) = edges.iter().find(|e| e.from >= n || e.to >= n) {
            return Err(GraphError::EdgeOutOfRange {
                from: e.from,
                to: e.to,
                n,
            });
        }
        let topology = Topology::from_edges(n, edges.iter().map(|e| (e.from, e.to)));
        Ok(ControlFlowGraph {
            vertices,
            edges,
            topology,
        })
    }

    pub fn vertices(&self) -> &[Instruction] {
        &self.vertices
    }

    /// Edges sorted by `(from, to)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|e| (e.from, e.to))
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.topology.preds[v]
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.topology.succs[v]
    }

    pub fn to_dot(&self) -> String {
        export_dot(self)
    }

    pub fn to_json(&self) -> String {
        export_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        parse_json(text)
    }
}

/// Reads and partitions an assembly file into blocks.
pub fn initialize_blocks(asm_text: &str) -> Result<Vec<Block>, AsmError> {
    asm::parse_assembly(asm_text)
}

pub fn find_block_by_label<'a>(blocks: &'a [Block], label: &str) -> Option<&'a Block> {
    blocks.iter().find(|b| !b.label.is_empty() && b.label == label)
}

/// First and last instruction index of the code a label names.
///
/// A label on an empty block (e.g. a function label immediately followed
/// by a `.LFB` label) aliases the next non-empty block.
fn resolve_target(blocks: &[Block], label: &str) -> Option<(usize, usize)> {
    let start = blocks
        .iter()
        .position(|b| !b.label.is_empty() && b.label == label)?;
    let block = blocks[start..].iter().find(|b| !b.instructions.is_empty())?;
    let first = block.instructions.first()?.index;
    let last = block.instructions.last()?.index;
    Some((first, last))
}

struct EdgeSet(BTreeMap<(usize, usize), Provenance>);

impl EdgeSet {
    fn add(&mut self, from: usize, to: usize, provenance: Provenance) {
        self.0
            .entry((from, to))
            .and_modify(|p| {
                if provenance.rank() > p.rank() {
                    *p = provenance;
                }
            })
            .or_insert(provenance);
    }
}

/// Builds the control flow graph of a block list.
pub fn build_cfg(blocks: &[Block], mode: EdgeMode) -> ControlFlowGraph {
    let vertices: Vec<Instruction> = blocks
        .iter()
        .flat_map(|b| b.instructions.iter().cloned())
        .collect();
    let mut edges = EdgeSet(BTreeMap::new());

    // Fallthrough, including across label boundaries.
    for pair in vertices.windows(2) {
        if mode.falls_through(pair[0].kind) {
            edges.add(pair[0].index, pair[1].index, Provenance::Fallthrough);
        }
    }

    for inst in &vertices {
        let Some(label) = inst.direct_target() else {
            continue;
        };
        let Some((first, last)) = resolve_target(blocks, label) else {
            continue;
        };
        match inst.kind {
            InstructionKind::CondJump | InstructionKind::UncondJump => {
                edges.add(inst.index, first, Provenance::Jump);
            }
            InstructionKind::Call => {
                edges.add(inst.index, first, Provenance::CallEntry);
                if inst.index + 1 < vertices.len() {
                    edges.add(last, inst.index + 1, Provenance::CallReturn);
                }
            }
            _ => {}
        }
    }

    let edges = edges
        .0
        .into_iter()
        .map(|((from, to), provenance)| Edge {
            from,
            to,
            provenance,
        })
        .collect();
    ControlFlowGraph::new(vertices, edges).expect("builder emits a well-formed graph")
}

/// Parses assembly text and builds its graph in one step.
pub fn graph_from_assembly(
    text: &str,
    taxonomy: &GroupTaxonomy,
    mode: EdgeMode,
) -> Result<ControlFlowGraph, AsmError> {
    let blocks = asm::parse_assembly_with(text, taxonomy)?;
    Ok(build_cfg(&blocks, mode))
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering; nodes are labeled `<index>: <mnemonic>`.
pub fn export_dot(graph: &ControlFlowGraph) -> String {
    let mut out = String::from("digraph cfg {\n");
    for v in &graph.vertices {
        let _ = writeln!(
            out,
            "  {} [label=\"{}: {}\"];",
            v.index,
            v.index,
            escape_dot(&v.mnemonic)
        );
    }
    for e in &graph.edges {
        let _ = writeln!(out, "  {} -> {};", e.from, e.to);
    }
    out.push_str("}\n");
    out
}

#[derive(Serialize, Deserialize)]
struct JsonVertex {
    index: usize,
    mnemonic: String,
    operands: Vec<String>,
    kind: String,
    group: String,
    symbols: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct JsonEdge {
    from: usize,
    to: usize,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct JsonGraph {
    vertices: Vec<JsonVertex>,
    edges: Vec<JsonEdge>,
}

pub fn export_json(graph: &ControlFlowGraph) -> String {
    let doc = JsonGraph {
        vertices: graph
            .vertices
            .iter()
            .map(|v| JsonVertex {
                index: v.index,
                mnemonic: v.mnemonic.clone(),
                operands: v.operands.clone(),
                kind: v.kind.as_str().to_string(),
                group: v.group.as_str().to_string(),
                symbols: v.normalized_symbols.clone(),
            })
            .collect(),
        edges: graph
            .edges
            .iter()
            .map(|e| JsonEdge {
                from: e.from,
                to: e.to,
                provenance: e.provenance,
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("graph serializes")
}

fn parse_json(text: &str) -> Result<ControlFlowGraph, GraphError> {
    let doc: JsonGraph = serde_json::from_str(text)?;
    let vertices = doc
        .vertices
        .into_iter()
        .map(|v| {
            let kind: InstructionKind = v.kind.parse().map_err(|reason| GraphError::Vertex {
                index: v.index,
                reason,
            })?;
            let group: Group = v.group.parse().map_err(|e: asm::UnknownGroup| GraphError::Vertex {
                index: v.index,
                reason: e.to_string(),
            })?;
            if v.symbols.first() != Some(&v.mnemonic) {
                return Err(GraphError::Vertex {
                    index: v.index,
                    reason: "symbols must start with the mnemonic".into(),
                });
            }
            Ok(Instruction {
                index: v.index,
                mnemonic: v.mnemonic,
                operands: v.operands,
                kind,
                normalized_symbols: v.symbols,
                group,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let edges = doc
        .edges
        .into_iter()
        .map(|e| Edge {
            from: e.from,
            to: e.to,
            provenance: e.provenance,
        })
        .collect();
    ControlFlowGraph::new(vertices, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn graph(text: &str, mode: EdgeMode) -> ControlFlowGraph {
        build_cfg(&initialize_blocks(text).unwrap(), mode)
    }

    fn pairs(g: &ControlFlowGraph) -> BTreeSet<(usize, usize)> {
        g.edge_pairs().collect()
    }

    #[test]
    fn initialize_blocks_contract() {
        assert!(initialize_blocks("").unwrap().is_empty());
        let two = initialize_blocks("a:\nnop\nb:\nret\n").unwrap();
        assert_eq!(two.iter().map(|b| b.label.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        let lead = initialize_blocks("nop\na:\nret\n").unwrap();
        assert_eq!(lead[0].label, "");
        assert_eq!(lead[1].label, "a");
    }

    #[test]
    fn find_block_by_label_cases() {
        let blocks = initialize_blocks("L1:\nnop\nL2:\nret\n").unwrap();
        assert_eq!(find_block_by_label(&blocks, "L2").unwrap().label, "L2");
        assert!(find_block_by_label(&blocks[..1], "printf").is_none());
        assert!(find_block_by_label(&[], "x").is_none());
        // the unlabeled leading block is never found by label
        let lead = initialize_blocks("nop\n").unwrap();
        assert!(find_block_by_label(&lead, "").is_none());
    }

    #[test]
    fn pure_fallthrough() {
        let g = graph("movl $1, %eax\naddl $2, %eax\nsubl $1, %eax\n", EdgeMode::Faithful);
        assert_eq!(pairs(&g), BTreeSet::from([(0, 1), (1, 2)]));
        assert!(g.edges().iter().all(|e| e.provenance == Provenance::Fallthrough));
    }

    #[test]
    fn conditional_jump_to_next_collapses() {
        let g = graph("cmpl $0, %eax\njne L1\nL1:\nmovl $1, %eax\nret\n", EdgeMode::Faithful);
        assert_eq!(pairs(&g), BTreeSet::from([(0, 1), (1, 2), (2, 3)]));
        assert_eq!(g.edges()[1].provenance, Provenance::Jump);
    }

    #[test]
    fn call_edges() {
        let text = "main:\ncall sum\nmovl %eax, %ebx\nret\nsum:\naddl %edi, %eax\nret\n";
        let g = graph(text, EdgeMode::Faithful);
        assert_eq!(
            pairs(&g),
            BTreeSet::from([(0, 1), (1, 2), (2, 3), (3, 4), (0, 3), (4, 1)])
        );
        let prov: BTreeMap<_, _> = g.edges().iter().map(|e| ((e.from, e.to), e.provenance)).collect();
        assert_eq!(prov[&(0, 3)], Provenance::CallEntry);
        assert_eq!(prov[&(4, 1)], Provenance::CallReturn);
        assert_eq!(prov[&(2, 3)], Provenance::Fallthrough);

        let strict = graph(text, EdgeMode::Strict);
        assert_eq!(
            pairs(&strict),
            BTreeSet::from([(0, 1), (1, 2), (3, 4), (0, 3), (4, 1)])
        );
    }

    #[test]
    fn external_and_indirect_targets_add_nothing() {
        let g = graph("call printf@PLT\ncall *%rax\njmp *%rdx\nret\n", EdgeMode::Faithful);
        assert_eq!(pairs(&g), BTreeSet::from([(0, 1), (1, 2), (2, 3)]));
    }

    #[test]
    fn call_as_last_instruction_has_no_return_edge() {
        let g = graph("f:\nnop\nret\nmain:\ncall f\n", EdgeMode::Strict);
        assert_eq!(pairs(&g), BTreeSet::from([(0, 1), (2, 0)]));
    }

    #[test]
    fn empty_label_aliases_next_block() {
        let g = graph("sum:\n.LFB0:\npushq %rbp\nret\nmain:\ncall sum\nret\n", EdgeMode::Strict);
        assert_eq!(pairs(&g), BTreeSet::from([(0, 1), (2, 0), (1, 3), (2, 3)]));
    }

    #[test]
    fn strict_drops_fallthrough_after_jmp_and_ret() {
        let g = graph("jmp L\nnop\nL:\nret\nnop\n", EdgeMode::Strict);
        assert_eq!(pairs(&g), BTreeSet::from([(0, 2), (1, 2)]));
        for e in g.edges() {
            if e.provenance == Provenance::Fallthrough {
                let kind = g.vertices()[e.from].kind;
                assert!(!matches!(kind, InstructionKind::UncondJump | InstructionKind::Return));
            }
        }
    }

    #[test]
    fn dot_output() {
        let empty = graph("", EdgeMode::Faithful);
        assert_eq!(export_dot(&empty), "digraph cfg {\n}\n");
        let chain = graph("movl $1, %eax\nret\n", EdgeMode::Faithful);
        assert_eq!(
            export_dot(&chain),
            "digraph cfg {\n  0 [label=\"0: movl\"];\n  1 [label=\"1: ret\"];\n  0 -> 1;\n}\n"
        );
        let call = graph(
            "main:\ncall sum\nmovl %eax, %ebx\nret\nsum:\naddl %edi, %eax\nret\n",
            EdgeMode::Faithful,
        );
        let dot = export_dot(&call);
        let edge_lines: Vec<&str> = dot.lines().filter(|l| l.contains("->")).collect();
        assert_eq!(dot.lines().filter(|l| l.contains("[label=")).count(), 5);
        assert_eq!(
            edge_lines,
            ["  0 -> 1;", "  0 -> 3;", "  1 -> 2;", "  2 -> 3;", "  3 -> 4;", "  4 -> 1;"]
        );
    }

    #[test]
    fn json_output() {
        assert_eq!(export_json(&graph("", EdgeMode::Faithful)), r#"{"vertices":[],"edges":[]}"#);
        let ret = graph("ret\n", EdgeMode::Faithful);
        assert_eq!(
            export_json(&ret),
            r#"{"vertices":[{"index":0,"mnemonic":"ret","operands":[],"kind":"Return","group":"return","symbols":["ret"]}],"edges":[]}"#
        );
        let g = graph("main:\ncall f\nret\nf:\naddq $32, %rsp\nret\n", EdgeMode::Faithful);
        assert_eq!(ControlFlowGraph::from_json(&export_json(&g)).unwrap(), g);
    }

    #[test]
    fn json_rejects_bad_graphs() {
        let bad = r#"{"vertices":[{"index":0,"mnemonic":"ret","operands":[],"kind":"Return","group":"return","symbols":["ret"]}],"edges":[{"from":0,"to":3,"provenance":"Jump"}]}"#;
        assert!(matches!(
            ControlFlowGraph::from_json(bad),
            Err(GraphError::EdgeOutOfRange { .. })
        ));
    }
}
