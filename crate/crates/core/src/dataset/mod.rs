//! Labelled program corpora: manifests, compilation to assembly, graph
//! ingestion, fold splitting and class statistics.

mod compile;
pub mod synth;

use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::asm::GroupTaxonomy;
use crate::cfg::{graph_from_assembly, ControlFlowGraph, EdgeMode};
use crate::exec::Exec;

pub use compile::{
    compile_to_assembly, CompileOutcome, CompilerConfig, DEFAULT_COMPILER_TEMPLATE,
    DEFAULT_COMPILE_TIMEOUT,
};

pub const NUM_CLASSES: usize = 5;

/// Judgement names indexed by label.
pub const LABEL_NAMES: [&str; NUM_CLASSES] = [
    "accepted",
    "time limit exceeded",
    "wrong answer",
    "runtime error",
    "compilation error",
];

/// Label given to sources that fail to compile.
pub const COMPILE_ERROR_LABEL: usize = 4;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("manifest row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("manifest header must be `path,label`, found `{0}`")]
    Header(String),
    #[error("need at least 5 samples to split, got {0}")]
    TooFewSamples(usize),
    #[error("compiler `{0}` not found")]
    CompilerMissing(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub graph: ControlFlowGraph,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    /// Line number in the manifest file (the header is line 1).
    pub row: usize,
    pub path: PathBuf,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV text with paths written relative to `base` where possible.
    pub fn to_csv(&self, base: &Path) -> String {
        let mut out = String::from("path,label\n");
        for r in &self.rows {
            let p = r.path.strip_prefix(base).unwrap_or(&r.path);
            out.push_str(&format!("{},{}\n", p.display(), r.label));
        }
        out
    }
}

/// Parses manifest CSV. Relative paths are resolved against `base`, and
/// every path must exist.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Manifest, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != ["path", "label"] {
        return Err(DatasetError::Header(header.join(",")));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let fail = |reason: String| DatasetError::Row { row, reason };
        if record.len() != 2 {
            return Err(fail(format!("expected 2 fields, found {}", record.len())));
        }
        let label: usize = record[1]
            .parse()
            .map_err(|_| fail(format!("label `{}` is not an integer", &record[1])))?;
        if label >= NUM_CLASSES {
            return Err(fail(format!("label {label} outside 0..{NUM_CLASSES}")));
        }
        if record[0].is_empty() {
            return Err(fail("empty path".into()));
        }
        let path = base.join(&record[0]);
        if !path.is_file() {
            return Err(fail(format!("{} does not exist", path.display())));
        }
        rows.push(ManifestRow { row, path, label });
    }
    Ok(Manifest { rows })
}

pub fn load_manifest(path: &Path) -> Result<Manifest, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Whether `path` is taken as assembly rather than compiled first.
pub fn is_assembly_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("s" | "S" | "asm")
    )
}

#[derive(Debug, Clone, Default)]
pub struct IngestConfig {
    pub taxonomy: GroupTaxonomy,
    pub mode: EdgeMode,
    pub compiler: CompilerConfig,
    pub exec: Exec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IngestStatus {
    Ok { vertices: usize, edges: usize },
    Empty,
    CompileFailed(String),
    TimedOut,
    ParseFailed(String),
}

impl fmt::Display for IngestStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestStatus::Ok { vertices, edges } => write!(f, "ok\t{vertices} vertices, {edges} edges"),
            IngestStatus::Empty => write!(f, "skipped\tempty"),
            IngestStatus::CompileFailed(msg) => write!(f, "skipped\tcompile failed: {msg}"),
            IngestStatus::TimedOut => write!(f, "skipped\tcompile timed out"),
            IngestStatus::ParseFailed(msg) => write!(f, "skipped\tparse failed: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestEntry {
    pub row: usize,
    pub path: PathBuf,
    pub label: usize,
    pub status: IngestStatus,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ingested {
    /// Successfully built graphs, in manifest order.
    pub samples: Vec<Sample>,
    /// One entry per manifest row, in manifest order.
    pub log: Vec<IngestEntry>,
}

impl Ingested {
    pub fn skipped(&self) -> impl Iterator<Item = &IngestEntry> {
        self.log
            .iter()
            .filter(|e| !matches!(e.status, IngestStatus::Ok { .. }))
    }

    /// Line-oriented `row<TAB>path<TAB>status<TAB>detail` log.
    pub fn log_text(&self) -> String {
        self.log
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.row, e.path.display(), e.status))
            .collect()
    }

    /// Class counts where every skipped row counts as a compilation error.
    pub fn reporting_stats(&self) -> ClassStats {
        ClassStats::from_labels(
            self.samples
                .iter()
                .map(|s| s.label)
                .chain(self.skipped().map(|_| COMPILE_ERROR_LABEL)),
        )
    }
}

fn ingest_row(row: &ManifestRow, config: &IngestConfig) -> Result<(IngestStatus, Option<Sample>), DatasetError> {
    let text = if is_assembly_path(&row.path) {
        std::fs::read_to_string(&row.path)?
    } else {
        if std::fs::read_to_string(&row.path)?.trim().is_empty() {
            return Ok((IngestStatus::Empty, None));
        }
        match compile_to_assembly(&row.path, &config.compiler)? {
            CompileOutcome::Compiled(text) => text,
            CompileOutcome::Failed { stderr, status } => {
                let first = stderr.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
                let msg = match status {
                    Some(code) => format!("exit {code}: {first}"),
                    None => format!("killed: {first}"),
                };
                return Ok((IngestStatus::CompileFailed(msg), None));
            }
            CompileOutcome::TimedOut => return Ok((IngestStatus::TimedOut, None)),
        }
    };
    let graph = match graph_from_assembly(&text, &config.taxonomy, config.mode) {
        Ok(g) => g,
        Err(e) => return Ok((IngestStatus::ParseFailed(e.to_string()), None)),
    };
    if graph.is_empty() {
        return Ok((IngestStatus::Empty, None));
    }
    let status = IngestStatus::Ok {
        vertices: graph.len(),
        edges: graph.edges().len(),
    };
    let sample = Sample {
        id: row.path.display().to_string(),
        graph,
        label: row.label,
    };
    Ok((status, Some(sample)))
}

/// Compiles (for non-assembly paths), parses and builds the graph of every
/// manifest row. Rows are processed concurrently under [`Exec::Parallel`]
/// but results keep manifest order. Empty, uncompilable or unparseable
/// inputs are logged and left out of the samples.
pub fn ingest(manifest: &Manifest, config: &IngestConfig) -> Result<Ingested, DatasetError> {
    config.compiler.validate()?;
    let results = config.exec.map(&manifest.rows, |row| ingest_row(row, config));
    let mut out = Ingested::default();
    for (row, result) in manifest.rows.iter().zip(results) {
        let (status, sample) = result?;
        if !matches!(status, IngestStatus::Ok { .. }) {
            log::warn!("skipping {} (row {}): {status}", row.path.display(), row.row);
        }
        out.log.push(IngestEntry {
            row: row.row,
            path: row.path.clone(),
            label: row.label,
            status,
        });
        out.samples.extend(sample);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Folds<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

/// Fold sizes for `n` items in ratio 3:1:1, rounding the cut points down.
pub fn fold_sizes(n: usize) -> (usize, usize, usize) {
    let (a, b) = (3 * n / 5, 4 * n / 5);
    (a, b - a, n - b)
}

/// Seeded shuffle followed by contiguous cuts at ⌊3N/5⌋ and ⌊4N/5⌋.
pub fn split<T>(items: Vec<T>, seed: u64) -> Result<Folds<T>, DatasetError> {
    let n = items.len();
    if n < 5 {
        return Err(DatasetError::TooFewSamples(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let mut shuffled = order.into_iter().map(|i| slots[i].take().expect("each index once"));
    let (a, b, c) = fold_sizes(n);
    let train = shuffled.by_ref().take(a).collect();
    let validation = shuffled.by_ref().take(b).collect();
    let test: Vec<T> = shuffled.collect();
    debug_assert_eq!(test.len(), c);
    Ok(Folds {
        train,
        validation,
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassStats {
    pub counts: [usize; NUM_CLASSES],
    pub total: usize,
}

impl ClassStats {
    /// Labels outside `0..5` count towards the total only.
    pub fn from_labels(labels: impl IntoIterator<Item = usize>) -> Self {
        let mut stats = ClassStats::default();
        for label in labels {
            if let Some(c) = stats.counts.get_mut(label) {
                *c += 1;
            }
            stats.total += 1;
        }
        stats
    }

    /// Largest class share, the accuracy of always predicting that class.
    pub fn majority_fraction(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        *self.counts.iter().max().unwrap_or(&0) as f64 / self.total as f64
    }

    /// CSV with header `label,name,count` and a closing `total` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,name,count\n");
        for (label, (count, name)) in self.counts.iter().zip(LABEL_NAMES).enumerate() {
            out.push_str(&format!("{label},{name},{count}\n"));
        }
        out.push_str(&format!("total,,{}\n", self.total));
        out
    }
}

pub fn class_stats(samples: &[Sample]) -> ClassStats {
    ClassStats::from_labels(samples.iter().map(|s| s.label))
}
