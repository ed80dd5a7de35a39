//! A trained network bundled with everything needed to apply it to new
//! assembly: hyperparameters, group taxonomy and vocabularies.
//!
//! # File format
//!
//! All integers little-endian.
//!
//! ```text
//! magic    b"CFGNNMDL"
//! version  u32 (= 1)
//! hyper    u64 length + UTF-8 key=value text
//! taxonomy u64 length + UTF-8 prefix<TAB>group text
//! vocabs   u32 count, then per vocabulary: u32 view id, u64 length + symbol<TAB>id text
//! tensors  u32 count, then per tensor: u32 name length, name, u64 rows, u64 cols,
//!          rows*cols f64 row-major
//! ```
//!
//! The companion manifest is text: a `format` line, one
//! `tensor<TAB>name<TAB>rows<TAB>cols<TAB>sha256` line per tensor and a
//! final `file<TAB>sha256` line covering the whole container.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::asm::GroupTaxonomy;
use crate::cfg::ControlFlowGraph;
use crate::exec::Exec;
use crate::features::{build_vocabulary, EncodedGraph, View, Vocabulary};

use super::hyper::{Hyperparams, ParameterCount};
use super::network::{argmax, Network};
use super::params::Params;
use super::train::{train_params, Example, TrainingLog};
use super::{ModelError, TrainError};

const MAGIC: &[u8; 8] = b"CFGNNMDL";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgcnnModel {
    pub hyper: Hyperparams,
    pub taxonomy: GroupTaxonomy,
    pub vocabs: Vec<Vocabulary>,
    pub params: Params,
}

impl DgcnnModel {
    /// Fresh model whose vocabularies cover `corpus`.
    pub fn initialize<'a>(
        hyper: Hyperparams,
        taxonomy: GroupTaxonomy,
        corpus: impl IntoIterator<Item = &'a ControlFlowGraph> + Clone,
    ) -> Result<Self, ModelError> {
        hyper.validate()?;
        let vocabs: Vec<Vocabulary> = hyper
            .features
            .views
            .list()
            .iter()
            .map(|&view| build_vocabulary(corpus.clone(), view, hyper.features.use_operands))
            .collect();
        let params = Params::init(hyper.dims(), &vocabs, hyper.token_dim, hyper.seed);
        Ok(DgcnnModel {
            hyper,
            taxonomy,
            vocabs,
            params,
        })
    }

    pub fn network(&self) -> Network<'_> {
        Network::new(&self.params, self.hyper.aggregation)
    }

    pub fn count_parameters(&self) -> ParameterCount {
        self.params.count_parameters()
    }

    pub fn encode(&self, graph: &ControlFlowGraph) -> Result<EncodedGraph, ModelError> {
        if graph.is_empty() {
            return Err(ModelError::EmptyGraph);
        }
        Ok(EncodedGraph::new(graph, &self.vocabs, self.hyper.features)?)
    }

    pub fn predict(&self, graph: &EncodedGraph) -> Result<Prediction, ModelError> {
        let probs = self.network().forward(graph)?;
        Ok(Prediction {
            label: argmax(&probs),
            probs,
        })
    }

    /// Predictions for many graphs, in input order.
    pub fn predict_all(&self, graphs: &[EncodedGraph], exec: Exec) -> Result<Vec<Prediction>, ModelError> {
        let net = self.network().with_exec(Exec::Sequential);
        exec.map(graphs, |g| {
            net.forward(g).map(|probs| Prediction {
                label: argmax(&probs),
                probs,
            })
        })
        .into_iter()
        .collect()
    }

    /// SHA-256 over every tensor's little-endian bytes, in tensor order.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for t in self.params.tensors() {
            for x in t.data {
                hasher.update(x.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for text in [self.hyper.to_text(), self.taxonomy.to_table()] {
            out.extend_from_slice(&(text.len() as u64).to_le_bytes());
            out.extend_from_slice(text.as_bytes());
        }
        out.extend_from_slice(&(self.vocabs.len() as u32).to_le_bytes());
        for v in &self.vocabs {
            let text = v.to_text();
            out.extend_from_slice(&(v.view().id() as u32).to_le_bytes());
            out.extend_from_slice(&(text.len() as u64).to_le_bytes());
            out.extend_from_slice(text.as_bytes());
        }
        let tensors = self.params.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for t in tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.rows as u64).to_le_bytes());
            out.extend_from_slice(&(t.cols as u64).to_le_bytes());
            for x in t.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(ModelError::Format("not a cfgnn model file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(ModelError::Format(format!("unsupported model version {version}")));
        }
        let hyper = Hyperparams::parse(&r.text()?)?;
        hyper.validate()?;
        let taxonomy = GroupTaxonomy::parse(&r.text()?)
            .map_err(|e| ModelError::Format(format!("taxonomy: {e}")))?;
        let n_vocabs = r.u32()? as usize;
        let mut vocabs = Vec::with_capacity(n_vocabs);
        for _ in 0..n_vocabs {
            let view = View::from_id(r.u32()? as usize)
                .ok_or_else(|| ModelError::Format("unknown view id".into()))?;
            let vocab = Vocabulary::parse(view, &r.text()?)
                .map_err(|e| ModelError::Format(format!("vocabulary: {e}")))?;
            vocabs.push(vocab);
        }
        let expected_views: Vec<View> = hyper.features.views.list().to_vec();
        if vocabs.iter().map(Vocabulary::view).collect::<Vec<_>>() != expected_views {
            return Err(ModelError::Format("vocabularies do not match the view setting".into()));
        }

        let sizes: Vec<usize> = vocabs.iter().map(Vocabulary::len).collect();
        let mut params = Params::zeros(hyper.dims(), &sizes, hyper.token_dim);
        let expected: Vec<(String, usize, usize)> = params
            .tensors()
            .into_iter()
            .map(|t| (t.name, t.rows, t.cols))
            .collect();
        let n_tensors = r.u32()? as usize;
        if n_tensors != expected.len() {
            return Err(ModelError::Format(format!(
                "expected {} tensors, found {n_tensors}",
                expected.len()
            )));
        }
        for ((name, rows, cols), (_, dst)) in expected.into_iter().zip(params.tensors_mut()) {
            let len = r.u32()? as usize;
            let got_name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| ModelError::Format("tensor name is not UTF-8".into()))?;
            let (got_rows, got_cols) = (r.u64()? as usize, r.u64()? as usize);
            if got_name != name || got_rows != rows || got_cols != cols {
                return Err(ModelError::Format(format!(
                    "tensor {got_name} ({got_rows}x{got_cols}) where {name} ({rows}x{cols}) was expected"
                )));
            }
            for x in dst.iter_mut() {
                *x = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
            }
        }
        if r.pos != bytes.len() {
            return Err(ModelError::Format("trailing bytes after tensors".into()));
        }
        Ok(DgcnnModel {
            hyper,
            taxonomy,
            vocabs,
            params,
        })
    }

    pub fn manifest(&self) -> String {
        let bytes = self.to_bytes();
        let mut out = format!("format\tcfgnn-model\t{VERSION}\n");
        for t in self.params.tensors() {
            let mut h = Sha256::new();
            for x in t.data {
                h.update(x.to_le_bytes());
            }
            out.push_str(&format!(
                "tensor\t{}\t{}\t{}\t{}\n",
                t.name,
                t.rows,
                t.cols,
                hex::encode(h.finalize())
            ));
        }
        out.push_str(&format!("file\t{}\n", hex::encode(Sha256::digest(&bytes))));
        out
    }

    /// Writes the container to `path` and its manifest next to it.
    pub fn save(&self, path: &Path) -> Result<PathBuf, ModelError> {
        std::fs::write(path, self.to_bytes())?;
        let manifest = manifest_path(path);
        std::fs::write(&manifest, self.manifest())?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// `<model>.manifest` beside the model file.
pub fn manifest_path(model: &Path) -> PathBuf {
    let mut name = model.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest");
    model.with_file_name(name)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ModelError::Format("unexpected end of model file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn text(&mut self) -> Result<String, ModelError> {
        let len = self.u64()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| ModelError::Format("section is not UTF-8".into()))
    }
}

/// Builds vocabularies from the training graphs, initializes a model and
/// trains it.
pub fn fit(
    hyper: &Hyperparams,
    taxonomy: &GroupTaxonomy,
    train: &[(&ControlFlowGraph, usize)],
    validation: &[(&ControlFlowGraph, usize)],
    exec: Exec,
) -> Result<(DgcnnModel, TrainingLog), TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let mut model = DgcnnModel::initialize(
        hyper.clone(),
        taxonomy.clone(),
        train.iter().map(|(g, _)| *g).collect::<Vec<_>>(),
    )?;
    let encode = |set: &[(&ControlFlowGraph, usize)]| -> Result<Vec<Example>, ModelError> {
        set.iter()
            .map(|(g, label)| {
                Ok(Example {
                    graph: model.encode(g)?,
                    label: *label,
                })
            })
            .collect()
    };
    let train_set = encode(train)?;
    let validation_set = encode(validation)?;
    let log = train_params(&mut model.params, hyper, &train_set, &validation_set, exec)?;
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_assembly;
    use crate::cfg::{build_cfg, EdgeMode};

    fn small_hyper() -> Hyperparams {
        Hyperparams {
            conv1: 4,
            conv2: 5,
            fc: 3,
            token_dim: 3,
            classes: 2,
            ..Hyperparams::default()
        }
    }

    fn graph(text: &str) -> ControlFlowGraph {
        build_cfg(&parse_assembly(text).unwrap(), EdgeMode::Faithful)
    }

    #[test]
    fn bytes_round_trip() {
        let g = graph("main:\ncall f\nret\nf:\naddq $32, %rsp\nret\n");
        let m = DgcnnModel::initialize(small_hyper(), GroupTaxonomy::default(), [&g]).unwrap();
        let back = DgcnnModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.checksum(), m.checksum());
        assert!(m.manifest().lines().any(|l| l.starts_with("tensor\tconv1.w_in\t4\t6\t")));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let g = graph("ret\n");
        let m = DgcnnModel::initialize(small_hyper(), GroupTaxonomy::default(), [&g]).unwrap();
        let bytes = m.to_bytes();
        assert!(DgcnnModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(DgcnnModel::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(DgcnnModel::from_bytes(&extra).is_err());
    }

    #[test]
    fn zero_model_predicts_class_zero() {
        let g = graph("movl $1, %eax\nret\n");
        let mut m = DgcnnModel::initialize(small_hyper(), GroupTaxonomy::default(), [&g]).unwrap();
        m.params = m.params.zeros_like();
        let p = m.predict(&m.encode(&g).unwrap()).unwrap();
        assert_eq!(p.label, 0);
        assert_eq!(p.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn empty_graph_cannot_be_encoded() {
        let g = graph("ret\n");
        let m = DgcnnModel::initialize(small_hyper(), GroupTaxonomy::default(), [&g]).unwrap();
        assert!(matches!(m.encode(&graph("")), Err(ModelError::EmptyGraph)));
    }

    #[test]
    fn manifest_path_is_sibling() {
        assert_eq!(manifest_path(Path::new("out/model.bin")), Path::new("out/model.bin.manifest"));
    }
}
