//! Independent reference implementations used to check the library.
//!
//! Shared between the integration tests and the acceptance runner, so
//! every helper here relies only on the public API and `rand`.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;

use cfgnn::cfg::{EdgeMode, Topology};
use cfgnn::dgcnn::{Aggregation, ConvLayer, Dense, ModelDims, Network, Params};
use cfgnn::features::EncodedGraph;
use cfgnn::linalg::Matrix;

// ---------------------------------------------------------------------------
// Control flow graphs

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Plain,
    CondJump,
    UncondJump,
    Call,
    Return,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Label(String),
    Ins {
        text: String,
        flow: Flow,
        /// Local label the instruction refers to directly, if any.
        target: Option<String>,
    },
}

#[derive(Debug, Clone)]
pub struct Snippet {
    pub items: Vec<Item>,
}

impl Snippet {
    pub fn text(&self) -> String {
        let mut s = String::new();
        for item in &self.items {
            match item {
                Item::Label(l) => s.push_str(&format!("{l}:\n")),
                Item::Ins { text, .. } => s.push_str(&format!("\t{text}\n")),
            }
        }
        s
    }

    pub fn instruction_count(&self) -> usize {
        self.items.iter().filter(|i| matches!(i, Item::Ins { .. })).count()
    }
}

const PLAIN: [&str; 10] = [
    "movl\t$1, %eax",
    "movq\t%rsp, %rbp",
    "addq\t$32, %rsp",
    "subl\t-8(%rbp), %eax",
    "cmpl\t$9, -4(%rbp)",
    "pushq\t%rbp",
    "popq\t%rbp",
    "leave",
    "cltq",
    "imull\t%edx, %eax",
];
const COND: [&str; 8] = ["je", "jne", "jl", "jle", "jg", "jge", "ja", "jb"];

/// Random labelled snippet with at most `max_instructions` instructions
/// mixing every kind of transfer, several labels per position, unresolved
/// and indirect targets.
pub fn random_snippet(rng: &mut impl Rng, max_instructions: usize) -> Snippet {
    let n = rng.random_range(1..=max_instructions);
    let label_count = rng.random_range(1..=6);
    let labels: Vec<String> = (0..label_count).map(|i| format!(".L{i}")).collect();
    let mut places: Vec<(usize, String)> = labels
        .iter()
        .map(|l| (rng.random_range(0..=n), l.clone()))
        .collect();
    if rng.random_bool(0.5) {
        places.push((0, "main".to_string()));
    }
    places.sort();
    let mut callable: Vec<String> = labels.clone();
    if places.iter().any(|(_, l)| l == "main") {
        callable.push("main".into());
    }

    let pick = |rng: &mut dyn rand::RngCore, local: bool| -> (String, Option<String>) {
        if local {
            let l = callable.choose(rng).unwrap().clone();
            (l.clone(), Some(l))
        } else {
            (".Lmissing".into(), None)
        }
    };

    let mut items = Vec::new();
    let mut p = 0;
    for i in 0..n {
        while p < places.len() && places[p].0 == i {
            items.push(Item::Label(places[p].1.clone()));
            p += 1;
        }
        let roll = rng.random_range(0..100);
        let item = if roll < 40 {
            Item::Ins {
                text: PLAIN.choose(rng).unwrap().to_string(),
                flow: Flow::Plain,
                target: None,
            }
        } else if roll < 55 {
            let local = rng.random_bool(0.85);
            let (name, target) = pick(rng, local);
            Item::Ins {
                text: format!("{}\t{name}", COND.choose(rng).unwrap()),
                flow: Flow::CondJump,
                target,
            }
        } else if roll < 65 {
            match rng.random_range(0..10) {
                0 => Item::Ins {
                    text: "jmp\t*%rax".into(),
                    flow: Flow::UncondJump,
                    target: None,
                },
                _ => {
                    let local = rng.random_bool(0.85);
                    let (name, target) = pick(rng, local);
                    Item::Ins {
                        text: format!("jmp\t{name}"),
                        flow: Flow::UncondJump,
                        target,
                    }
                }
            }
        } else if roll < 85 {
            match rng.random_range(0..6) {
                0 => Item::Ins {
                    text: "call\tprintf@PLT".into(),
                    flow: Flow::Call,
                    target: None,
                },
                1 => Item::Ins {
                    text: "call\t*%rdx".into(),
                    flow: Flow::Call,
                    target: None,
                },
                2 => {
                    let (name, target) = pick(rng, true);
                    Item::Ins {
                        text: format!("call\t{name}@PLT"),
                        flow: Flow::Call,
                        target,
                    }
                }
                _ => {
                    let (name, target) = pick(rng, true);
                    Item::Ins {
                        text: format!("call\t{name}"),
                        flow: Flow::Call,
                        target,
                    }
                }
            }
        } else {
            Item::Ins {
                text: "ret".into(),
                flow: Flow::Return,
                target: None,
            }
        };
        items.push(item);
    }
    while p < places.len() {
        items.push(Item::Label(places[p].1.clone()));
        p += 1;
    }
    Snippet { items }
}

/// Applies the edge rules directly to the snippet's item list.
pub fn brute_force_edges(snippet: &Snippet, mode: EdgeMode) -> BTreeSet<(usize, usize)> {
    // instruction list and the instruction position of every label
    let mut flows = Vec::new();
    let mut targets = Vec::new();
    let mut label_pos: Vec<(String, usize)> = Vec::new();
    for item in &snippet.items {
        match item {
            Item::Label(l) => label_pos.push((l.clone(), flows.len())),
            Item::Ins { flow, target, .. } => {
                flows.push(*flow);
                targets.push(target.clone());
            }
        }
    }
    let n = flows.len();
    let mut edges = BTreeSet::new();

    for i in 0..n.saturating_sub(1) {
        let suppressed = mode == EdgeMode::Strict && matches!(flows[i], Flow::UncondJump | Flow::Return);
        if !suppressed {
            edges.insert((i, i + 1));
        }
    }
    for i in 0..n {
        let Some(label) = &targets[i] else { continue };
        let Some(&(_, pos)) = label_pos.iter().find(|(l, _)| l == label) else {
            continue;
        };
        if pos >= n {
            continue;
        }
        // the target block runs until the next label placed after `pos`
        let end = label_pos
            .iter()
            .map(|&(_, p)| p)
            .filter(|&p| p > pos)
            .min()
            .unwrap_or(n);
        match flows[i] {
            Flow::CondJump | Flow::UncondJump => {
                edges.insert((i, pos));
            }
            Flow::Call => {
                edges.insert((i, pos));
                if i + 1 < n {
                    edges.insert((end - 1, i + 1));
                }
            }
            _ => {}
        }
    }
    edges
}

// ---------------------------------------------------------------------------
// Networks

pub fn small_dims(input: usize) -> ModelDims {
    ModelDims {
        input,
        conv1: 4,
        conv2: 5,
        fc: 3,
        classes: 5,
    }
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect(),
    )
}

fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Parameters with every entry, biases included, drawn at random.
pub fn random_params(rng: &mut impl Rng, dims: ModelDims, vocab_sizes: &[usize], token_dim: usize) -> Params {
    let mut conv = |outputs, inputs| ConvLayer {
        w_cur: random_matrix(rng, outputs, inputs, 0.8),
        w_in: random_matrix(rng, outputs, inputs, 0.8),
        w_out: random_matrix(rng, outputs, inputs, 0.8),
        bias: random_vec(rng, outputs, 0.3),
    };
    let conv1 = conv(dims.conv1, dims.input);
    let conv2 = conv(dims.conv2, dims.conv1);
    let mut dense = |outputs, inputs| Dense {
        weight: random_matrix(rng, outputs, inputs, 0.8),
        bias: random_vec(rng, outputs, 0.3),
    };
    let fc = dense(dims.fc, dims.conv2);
    let out = dense(dims.classes, dims.fc);
    let embeddings = vocab_sizes
        .iter()
        .map(|&n| random_matrix(rng, n, token_dim, 1.0))
        .collect();
    Params {
        embeddings,
        conv1,
        conv2,
        fc,
        out,
    }
}

/// Random directed graph on `n` vertices with random symbol ids per view.
pub fn random_encoded_graph(rng: &mut impl Rng, n: usize, vocab_sizes: &[usize]) -> EncodedGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if rng.random_bool(0.3) {
                edges.push((u, v));
            }
        }
    }
    let symbol_ids = (0..n)
        .map(|_| {
            vocab_sizes
                .iter()
                .map(|&size| (0..rng.random_range(1..4)).map(|_| rng.random_range(0..size)).collect())
                .collect()
        })
        .collect();
    EncodedGraph {
        symbol_ids,
        topology: Topology::from_edges(n, edges),
    }
}

pub fn loss_of(params: &Params, aggregation: Aggregation, graph: &EncodedGraph, label: usize) -> f64 {
    let probs = Network::new(params, aggregation).forward(graph).unwrap();
    -probs[label].ln()
}

/// Largest relative error between the analytic gradient and central finite
/// differences over every entry of every tensor, with the tensor it occurs in.
pub fn gradient_check(
    params: &Params,
    aggregation: Aggregation,
    graph: &EncodedGraph,
    label: usize,
    eps: f64,
) -> (f64, String) {
    let net = Network::new(params, aggregation);
    let pass = net.forward_pass(graph).unwrap();
    let analytic = net.backward(graph, &pass, label);
    let analytic: Vec<(String, Vec<f64>)> = analytic
        .tensors()
        .into_iter()
        .map(|t| (t.name, t.data.to_vec()))
        .collect();

    let mut probe = params.clone();
    let mut worst = (0.0, String::new());
    for (ti, (name, grads)) in analytic.iter().enumerate() {
        for (k, &a) in grads.iter().enumerate() {
            let original = params.tensors()[ti].data[k];
            let set = |p: &mut Params, x: f64| {
                p.tensors_mut()[ti].1[k] = x;
            };
            set(&mut probe, original + eps);
            let up = loss_of(&probe, aggregation, graph, label);
            set(&mut probe, original - eps);
            let down = loss_of(&probe, aggregation, graph, label);
            set(&mut probe, original);
            let numeric = (up - down) / (2.0 * eps);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{k}]: analytic {a:e}, numeric {numeric:e}"));
            }
        }
    }
    worst
}

/// Vertex permutation `perm` (new index of old vertex `v` is `perm[v]`).
pub fn permute_graph(graph: &EncodedGraph, perm: &[usize]) -> EncodedGraph {
    let n = graph.len();
    let mut symbol_ids = vec![Vec::new(); n];
    for (v, ids) in graph.symbol_ids.iter().enumerate() {
        symbol_ids[perm[v]] = ids.clone();
    }
    let edges = (0..n).flat_map(|u| graph.topology.succs[u].iter().map(move |&v| (perm[u], perm[v])));
    EncodedGraph {
        symbol_ids,
        topology: Topology::from_edges(n, edges.collect::<Vec<_>>()),
    }
}

// ---------------------------------------------------------------------------
// Metrics

/// Normalized Mann-Whitney count: pairs with the positive ranked above the
/// negative, ties counting one half.
pub fn wilcoxon_statistic(scores: &[f64], positive: &[bool]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(positive).filter(|(_, &p)| p).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(positive).filter(|(_, &p)| !p).map(|(&s, _)| s).collect();
    let mut total = 0.0;
    for &p in &pos {
        for &n in &neg {
            total += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    total / (pos.len() * neg.len()) as f64
}

/// ROC points from evaluating every distinct score as a threshold,
/// highest first, after the origin.
pub fn enumerate_roc(scores: &[f64], positive: &[bool]) -> Vec<(f64, f64)> {
    let p = positive.iter().filter(|&&x| x).count() as f64;
    let n = positive.len() as f64 - p;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut points = vec![(0.0, 0.0)];
    for t in thresholds {
        let tp = scores.iter().zip(positive).filter(|(&s, &y)| y && s >= t).count() as f64;
        let fp = scores.iter().zip(positive).filter(|(&s, &y)| !y && s >= t).count() as f64;
        points.push((fp / n, tp / p));
    }
    points
}

/// Scores drawn from a small grid so ties are common.
pub fn tied_scores(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0..8) as f64 / 7.0).collect()
}

/// Random labels guaranteed to contain both classes.
pub fn binary_labels(rng: &mut impl Rng, n: usize) -> Vec<bool> {
    assert!(n >= 2);
    let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    labels[0] = true;
    labels[1] = false;
    labels
}

/// Random row-stochastic score matrix.
pub fn random_probabilities(rng: &mut impl Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / sum).collect()
        })
        .collect()
}
