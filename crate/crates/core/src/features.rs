//! Symbol vocabularies, embedding tables and per-vertex view vectors.
//!
//! A vertex has one vector per view. The instruction view averages the
//! embeddings of the mnemonic and (optionally) its normalized operand
//! symbols; the group view is the embedding of the instruction group.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::asm::Instruction;
use crate::cfg::{ControlFlowGraph, Topology};
use crate::linalg::Matrix;

pub const UNK: &str = "<unk>";
pub const UNK_ID: usize = 0;

/// Half-width of the uniform embedding initialization range.
pub const EMBEDDING_INIT_RANGE: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("view vector of an empty symbol list")]
    EmptySymbols,
    #[error("expected {expected} vocabularies/tables, got {got}")]
    ViewCount { expected: usize, got: usize },
    #[error("table for view {table} paired with vocabulary for view {vocab}")]
    ViewMismatch { vocab: View, table: View },
    #[error("embedding table has {rows} rows but vocabulary has {vocab} symbols")]
    TableSize { rows: usize, vocab: usize },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum View {
    /// Mnemonic with optional normalized operands.
    Instruction,
    /// Coarse instruction group.
    Group,
}

impl View {
    pub fn id(self) -> usize {
        match self {
            View::Instruction => 1,
            View::Group => 2,
        }
    }

    pub fn from_id(id: usize) -> Option<View> {
        match id {
            1 => Some(View::Instruction),
            2 => Some(View::Group),
            _ => None,
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// Which views feed the network and whether operands are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureConfig {
    pub views: Views,
    pub use_operands: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            views: Views::Two,
            use_operands: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Views {
    One,
    Two,
}

impl Views {
    pub fn count(self) -> usize {
        match self {
            Views::One => 1,
            Views::Two => 2,
        }
    }

    pub fn list(self) -> &'static [View] {
        match self {
            Views::One => &[View::Instruction],
            Views::Two => &[View::Instruction, View::Group],
        }
    }
}

impl FromStr for Views {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" => Ok(Views::One),
            "2" => Ok(Views::Two),
            other => Err(format!("views must be 1 or 2, got `{other}`")),
        }
    }
}

impl fmt::Display for Views {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.count())
    }
}

/// The symbols a vertex contributes to one view.
pub fn vertex_symbols(inst: &Instruction, view: View, use_operands: bool) -> Vec<&str> {
    match view {
        View::Instruction if use_operands => {
            inst.normalized_symbols.iter().map(String::as_str).collect()
        }
        View::Instruction => vec![inst.mnemonic.as_str()],
        View::Group => vec![inst.group.as_str()],
    }
}

/// Dense symbol ids for one view; id 0 is always [`UNK`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    view: View,
    symbols: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocabulary {
    /// Vocabulary over `symbols` (deduplicated, sorted), with UNK prepended.
    pub fn new<'a>(view: View, symbols: impl IntoIterator<Item = &'a str>) -> Self {
        let sorted: BTreeSet<&str> = symbols.into_iter().filter(|s| *s != UNK).collect();
        let symbols: Vec<String> = std::iter::once(UNK)
            .chain(sorted)
            .map(str::to_string)
            .collect();
        let ids = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Vocabulary { view, symbols, ids }
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.ids.contains_key(symbol)
    }

    /// Id of `symbol`, falling back to [`UNK_ID`].
    pub fn id(&self, symbol: &str) -> usize {
        self.ids.get(symbol).copied().unwrap_or(UNK_ID)
    }

    /// `symbol<TAB>id` lines.
    pub fn to_text(&self) -> String {
        self.symbols
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{s}\t{i}\n"))
            .collect()
    }

    pub fn parse(view: View, text: &str) -> Result<Self, FeatureError> {
        let mut symbols = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let malformed = |reason: &str| FeatureError::Malformed {
                line: i + 1,
                reason: reason.to_string(),
            };
            let (symbol, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| malformed("expected `symbol<TAB>id`"))?;
            let id: usize = id.parse().map_err(|_| malformed("id is not an integer"))?;
            if id != symbols.len() {
                return Err(malformed("ids must be dense and ascending"));
            }
            symbols.push(symbol.to_string());
        }
        if symbols.first().map(String::as_str) != Some(UNK) {
            return Err(FeatureError::Malformed {
                line: 1,
                reason: format!("first symbol must be {UNK}"),
            });
        }
        let ids: HashMap<String, usize> = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        if ids.len() != symbols.len() {
            return Err(FeatureError::Malformed {
                line: 0,
                reason: "duplicate symbol".into(),
            });
        }
        Ok(Vocabulary { view, symbols, ids })
    }
}

pub fn build_vocabulary<'a>(
    corpus: impl IntoIterator<Item = &'a ControlFlowGraph>,
    view: View,
    use_operands: bool,
) -> Vocabulary {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for graph in corpus {
        for inst in graph.vertices() {
            seen.extend(vertex_symbols(inst, view, use_operands));
        }
    }
    Vocabulary::new(view, seen)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub view: View,
    pub matrix: Matrix,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    /// Header `view<TAB>rows<TAB>cols`, then one tab-separated row per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\t{}\t{}\n", self.view, self.matrix.rows(), self.matrix.cols());
        for r in 0..self.matrix.rows() {
            let row: Vec<String> = self.matrix.row(r).iter().map(f64::to_string).collect();
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, FeatureError> {
        let mut lines = text.lines();
        let malformed = |line: usize, reason: &str| FeatureError::Malformed {
            line,
            reason: reason.to_string(),
        };
        let header: Vec<usize> = lines
            .next()
            .ok_or_else(|| malformed(1, "missing header"))?
            .split('\t')
            .map(|f| f.parse().map_err(|_| malformed(1, "header fields must be integers")))
            .collect::<Result<_, _>>()?;
        let [view, rows, cols] = header[..] else {
            return Err(malformed(1, "header needs view, rows, cols"));
        };
        let view = View::from_id(view).ok_or_else(|| malformed(1, "unknown view"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let line = lines.next().ok_or_else(|| malformed(r + 2, "missing row"))?;
            let before = data.len();
            for field in line.split('\t').filter(|f| !f.is_empty()) {
                data.push(field.parse().map_err(|_| malformed(r + 2, "bad number"))?);
            }
            if data.len() - before != cols {
                return Err(malformed(r + 2, "wrong number of columns"));
            }
        }
        Ok(EmbeddingTable {
            view,
            matrix: Matrix::from_vec(rows, cols, data),
        })
    }
}

/// Uniform `[-0.1, 0.1]` table with one row per vocabulary symbol.
pub fn init_embeddings(vocab: &Vocabulary, dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..vocab.len() * dim)
        .map(|_| rng.random_range(-EMBEDDING_INIT_RANGE..=EMBEDDING_INIT_RANGE))
        .collect();
    EmbeddingTable {
        view: vocab.view(),
        matrix: Matrix::from_vec(vocab.len(), dim, data),
    }
}

/// Mean of the embedding rows of `symbols`; unknown symbols use the UNK row.
pub fn view_vector(
    symbols: &[&str],
    vocab: &Vocabulary,
    table: &EmbeddingTable,
) -> Result<Vec<f64>, FeatureError> {
    let ids: Vec<usize> = symbols.iter().map(|s| vocab.id(s)).collect();
    mean_of_rows(&ids, &table.matrix)
}

pub(crate) fn mean_of_rows(ids: &[usize], table: &Matrix) -> Result<Vec<f64>, FeatureError> {
    if ids.is_empty() {
        return Err(FeatureError::EmptySymbols);
    }
    let mut out = vec![0.0; table.cols()];
    for &id in ids {
        crate::linalg::axpy(1.0, table.row(id), &mut out);
    }
    let scale = 1.0 / ids.len() as f64;
    out.iter_mut().for_each(|x| *x *= scale);
    Ok(out)
}

/// Per-vertex view vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeViews {
    pub dim: usize,
    /// `vectors[vertex][view]`, each of length `dim`.
    pub vectors: Vec<Vec<Vec<f64>>>,
}

impl NodeViews {
    pub fn num_vertices(&self) -> usize {
        self.vectors.len()
    }

    /// One row per vertex with the views concatenated in order.
    pub fn concatenated(&self) -> Matrix {
        let rows: Vec<Vec<f64>> = self.vectors.iter().map(|views| views.concat()).collect();
        if rows.is_empty() {
            return Matrix::zeros(0, 0);
        }
        Matrix::from_rows(&rows)
    }
}

fn check_views(
    vocabs: &[Vocabulary],
    config: FeatureConfig,
) -> Result<(), FeatureError> {
    let expected = config.views.count();
    if vocabs.len() != expected {
        return Err(FeatureError::ViewCount {
            expected,
            got: vocabs.len(),
        });
    }
    Ok(())
}

pub fn featurize_graph(
    graph: &ControlFlowGraph,
    vocabs: &[Vocabulary],
    tables: &[EmbeddingTable],
    config: FeatureConfig,
) -> Result<NodeViews, FeatureError> {
    check_views(vocabs, config)?;
    if tables.len() != vocabs.len() {
        return Err(FeatureError::ViewCount {
            expected: vocabs.len(),
            got: tables.len(),
        });
    }
    for (v, t) in vocabs.iter().zip(tables) {
        if v.view() != t.view {
            return Err(FeatureError::ViewMismatch {
                vocab: v.view(),
                table: t.view,
            });
        }
        if t.matrix.rows() != v.len() {
            return Err(FeatureError::TableSize {
                rows: t.matrix.rows(),
                vocab: v.len(),
            });
        }
    }
    let dim = tables.first().map_or(0, EmbeddingTable::dim);
    let encoded = EncodedGraph::new(graph, vocabs, config)?;
    let vectors = encoded
        .symbol_ids
        .iter()
        .map(|views| {
            views
                .iter()
                .zip(tables)
                .map(|(ids, t)| mean_of_rows(ids, &t.matrix))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NodeViews { dim, vectors })
}

/// A graph reduced to what the network consumes: symbol ids per vertex
/// and view, plus adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedGraph {
    /// `symbol_ids[vertex][view]`, never empty.
    pub symbol_ids: Vec<Vec<Vec<usize>>>,
    pub topology: Topology,
}

impl EncodedGraph {
    pub fn new(
        graph: &ControlFlowGraph,
        vocabs: &[Vocabulary],
        config: FeatureConfig,
    ) -> Result<Self, FeatureError> {
        check_views(vocabs, config)?;
        let symbol_ids = graph
            .vertices()
            .iter()
            .map(|inst| {
                vocabs
                    .iter()
                    .map(|vocab| {
                        vertex_symbols(inst, vocab.view(), config.use_operands)
                            .into_iter()
                            .map(|s| vocab.id(s))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(EncodedGraph {
            symbol_ids,
            topology: graph.topology().clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.symbol_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbol_ids.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_assembly;
    use crate::cfg::{build_cfg, EdgeMode};

    fn graph(text: &str) -> ControlFlowGraph {
        build_cfg(&parse_assembly(text).unwrap(), EdgeMode::Faithful)
    }

    #[test]
    fn vocabulary_examples() {
        let rets = graph("ret\nret\n");
        let v = build_vocabulary([&rets], View::Instruction, false);
        assert_eq!(v.symbols(), [UNK, "ret"]);

        let add = graph("addq $32, %rsp\n");
        let op = build_vocabulary([&add], View::Instruction, true);
        assert_eq!(op.symbols(), [UNK, "addq", "reg", "val"]);
        let groups = build_vocabulary([&add], View::Group, true);
        assert_eq!(groups.symbols(), [UNK, "arithmetic"]);
        assert_eq!(op.id("subq"), UNK_ID);
    }

    #[test]
    fn vocabulary_text_round_trip() {
        let g = graph("addq $32, %rsp\ncall f\nret\n");
        let v = build_vocabulary([&g], View::Instruction, true);
        assert_eq!(Vocabulary::parse(View::Instruction, &v.to_text()).unwrap(), v);
        assert!(Vocabulary::parse(View::Instruction, "ret\t0\n").is_err());
        assert!(Vocabulary::parse(View::Instruction, "<unk>\t0\nret\t2\n").is_err());
    }

    #[test]
    fn embeddings_are_seeded_and_bounded() {
        let v = Vocabulary::new(View::Instruction, ["a", "b", "c"]);
        let a = init_embeddings(&v, 30, 7);
        assert_eq!(a, init_embeddings(&v, 30, 7));
        assert_ne!(a, init_embeddings(&v, 30, 8));
        assert_eq!(a.matrix.shape(), (4, 30));

        let names: Vec<String> = (0..100).map(|i| i.to_string()).collect();
        let big = Vocabulary::new(View::Group, names.iter().map(String::as_str));
        let t = init_embeddings(&big, 1000, 1);
        assert!(t.matrix.rows() * t.matrix.cols() >= 100_000);
        assert!(t.matrix.as_slice().iter().all(|x| x.abs() <= EMBEDDING_INIT_RANGE && x.is_finite()));
    }

    #[test]
    fn embedding_text_round_trip() {
        let v = Vocabulary::new(View::Group, ["move", "call"]);
        let t = init_embeddings(&v, 5, 3);
        assert_eq!(EmbeddingTable::parse(&t.to_text()).unwrap(), t);
        assert!(EmbeddingTable::parse("2\t1\t2\n0.5\n").is_err());
    }

    #[test]
    fn view_vector_is_mean() {
        let v = Vocabulary::new(View::Instruction, ["addq", "reg", "val", "ret"]);
        let t = init_embeddings(&v, 30, 11);
        let ret = view_vector(&["ret"], &v, &t).unwrap();
        assert_eq!(ret, t.matrix.row(v.id("ret")));

        let got = view_vector(&["addq", "val", "reg"], &v, &t).unwrap();
        for (k, g) in got.iter().enumerate() {
            let mut s = 0.0;
            for sym in ["addq", "val", "reg"] {
                s += t.matrix[(v.id(sym), k)];
            }
            assert!((g - s / 3.0).abs() < 1e-15);
        }
        assert_eq!(view_vector(&[], &v, &t).unwrap_err(), FeatureError::EmptySymbols);

        let unknown = view_vector(&["nope"], &v, &t).unwrap();
        assert_eq!(unknown, t.matrix.row(UNK_ID));
    }

    #[test]
    fn featurize_shapes() {
        let g = graph("addq $32, %rsp\nret\n");
        let cfg1 = FeatureConfig {
            views: Views::One,
            use_operands: true,
        };
        let v1 = build_vocabulary([&g], View::Instruction, true);
        let t1 = init_embeddings(&v1, 30, 1);
        let one = featurize_graph(&g, std::slice::from_ref(&v1), std::slice::from_ref(&t1), cfg1).unwrap();
        assert_eq!(one.num_vertices(), 2);
        assert!(one.vectors.iter().all(|vs| vs.len() == 1 && vs[0].len() == 30));
        let expected = view_vector(&["addq", "val", "reg"], &v1, &t1).unwrap();
        assert_eq!(one.vectors[0][0], expected);

        let cfg2 = FeatureConfig {
            views: Views::Two,
            use_operands: true,
        };
        let v2 = build_vocabulary([&g], View::Group, true);
        let t2 = init_embeddings(&v2, 30, 2);
        let two = featurize_graph(&g, &[v1.clone(), v2.clone()], &[t1.clone(), t2.clone()], cfg2).unwrap();
        assert!(two.vectors.iter().all(|vs| vs.len() == 2));
        assert_eq!(two.vectors[1][1], t2.matrix.row(v2.id("return")));
        assert_eq!(two.concatenated().shape(), (2, 60));

        assert!(matches!(
            featurize_graph(&g, std::slice::from_ref(&v1), std::slice::from_ref(&t1), cfg2),
            Err(FeatureError::ViewCount { .. })
        ));
        assert!(matches!(
            featurize_graph(&g, &[v1, v2], &[t2, t1], cfg2),
            Err(FeatureError::ViewMismatch { .. })
        ));
    }

    #[test]
    fn noop_uses_mnemonic_only() {
        let g = graph("addq $32, %rsp\n");
        let cfg = FeatureConfig {
            views: Views::One,
            use_operands: false,
        };
        let v = build_vocabulary([&g], View::Instruction, false);
        let e = EncodedGraph::new(&g, std::slice::from_ref(&v), cfg).unwrap();
        assert_eq!(e.symbol_ids[0][0], vec![v.id("addq")]);
    }
}
