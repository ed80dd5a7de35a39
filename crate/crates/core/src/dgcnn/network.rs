//! Forward and backward passes.
//!
//! Per vertex `u`, a convolution computes
//! `tanh(W_cur x_u + Σ_{p ∈ pred(u)} W_in x_p + Σ_{s ∈ succ(u)} W_out x_s + b)`.
//! Two such layers are followed by an elementwise max over vertices, a
//! tanh hidden layer and a softmax output.

use crate::cfg::Topology;
use crate::exec::Exec;
use crate::features::{mean_of_rows, EncodedGraph, NodeViews};
use crate::linalg::{axpy, gemm_nn_acc, gemm_nt_acc, gemm_tn_acc, Matrix};

use super::hyper::Aggregation;
use super::params::{ConvLayer, Dense, Params};
use super::ModelError;

/// Neighbor sums feeding `W_in` (predecessors) and `W_out` (successors).
fn aggregate(x: &Matrix, neighbors: &[Vec<usize>], aggregation: Aggregation) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for (u, list) in neighbors.iter().enumerate() {
        if list.is_empty() {
            continue;
        }
        let row = out.row_mut(u);
        for &p in list {
            axpy(1.0, x.row(p), row);
        }
        if aggregation == Aggregation::Mean {
            let s = 1.0 / list.len() as f64;
            row.iter_mut().for_each(|v| *v *= s);
        }
    }
    out
}

fn neighbor_scale(list: &[usize], aggregation: Aggregation) -> f64 {
    match aggregation {
        Aggregation::Sum => 1.0,
        Aggregation::Mean if list.is_empty() => 0.0,
        Aggregation::Mean => 1.0 / list.len() as f64,
    }
}

/// Saved intermediate values of one convolution.
#[derive(Debug, Clone)]
struct ConvCache {
    agg_in: Matrix,
    agg_out: Matrix,
    output: Matrix,
}

fn conv_apply(
    exec: Exec,
    layer: &ConvLayer,
    x: &Matrix,
    topology: &Topology,
    aggregation: Aggregation,
) -> Result<ConvCache, ModelError> {
    if x.cols() != layer.inputs() {
        return Err(ModelError::Dimension {
            what: "convolution input width",
            expected: layer.inputs(),
            got: x.cols(),
        });
    }
    if x.rows() != topology.len() {
        return Err(ModelError::Dimension {
            what: "vertex count",
            expected: topology.len(),
            got: x.rows(),
        });
    }
    let agg_in = aggregate(x, &topology.preds, aggregation);
    let agg_out = aggregate(x, &topology.succs, aggregation);
    let mut output = Matrix::zeros(x.rows(), layer.outputs());
    for u in 0..x.rows() {
        output.row_mut(u).copy_from_slice(&layer.bias);
    }
    gemm_nt_acc(exec, x, &layer.w_cur, &mut output);
    gemm_nt_acc(exec, &agg_in, &layer.w_in, &mut output);
    gemm_nt_acc(exec, &agg_out, &layer.w_out, &mut output);
    output.map_inplace(f64::tanh);
    Ok(ConvCache {
        agg_in,
        agg_out,
        output,
    })
}

/// One graph convolution over all vertices; row `u` of `inputs` is vertex `u`.
pub fn conv_forward(
    layer: &ConvLayer,
    inputs: &Matrix,
    topology: &Topology,
    aggregation: Aggregation,
) -> Result<Matrix, ModelError> {
    conv_apply(Exec::default(), layer, inputs, topology, aggregation).map(|c| c.output)
}

/// Elementwise maximum over vertices and, per coordinate, the first vertex
/// attaining it.
pub fn dynamic_max_pool_with_argmax(nodes: &Matrix) -> Result<(Vec<f64>, Vec<usize>), ModelError> {
    if nodes.rows() == 0 {
        return Err(ModelError::EmptyGraph);
    }
    let mut pooled = nodes.row(0).to_vec();
    let mut argmax = vec![0usize; nodes.cols()];
    for u in 1..nodes.rows() {
        for (k, &v) in nodes.row(u).iter().enumerate() {
            if v > pooled[k] {
                pooled[k] = v;
                argmax[k] = u;
            }
        }
    }
    Ok((pooled, argmax))
}

pub fn dynamic_max_pool(nodes: &Matrix) -> Result<Vec<f64>, ModelError> {
    dynamic_max_pool_with_argmax(nodes).map(|(p, _)| p)
}

fn dense_apply(layer: &Dense, x: &[f64]) -> Vec<f64> {
    let mut out = layer.bias.clone();
    for (o, row) in out.iter_mut().zip(0..layer.weight.rows()) {
        *o += crate::linalg::dot(layer.weight.row(row), x);
    }
    out
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of a probability vector against a class label.
pub fn loss(probs: &[f64], label: usize) -> f64 {
    -probs[label].ln()
}

/// Index of the largest probability, lowest index on ties.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    input: Matrix,
    conv1: ConvCache,
    conv2: ConvCache,
    argmax: Vec<usize>,
    pooled: Vec<f64>,
    hidden: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ForwardPass {
    pub fn pooled(&self) -> &[f64] {
        &self.pooled
    }

    pub fn conv2_output(&self) -> &Matrix {
        &self.conv2.output
    }
}

/// Parameters plus the settings that shape a pass.
#[derive(Debug, Clone, Copy)]
pub struct Network<'a> {
    pub params: &'a Params,
    pub aggregation: Aggregation,
    pub exec: Exec,
}

impl<'a> Network<'a> {
    pub fn new(params: &'a Params, aggregation: Aggregation) -> Self {
        Network {
            params,
            aggregation,
            exec: Exec::default(),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Embedding layer: per vertex, the mean embedding of each view's
    /// symbols, views concatenated.
    pub fn embed(&self, graph: &EncodedGraph) -> Result<Matrix, ModelError> {
        let tables = &self.params.embeddings;
        let dim = tables.first().map_or(0, Matrix::cols);
        let mut x = Matrix::zeros(graph.len(), dim * tables.len());
        for (u, views) in graph.symbol_ids.iter().enumerate() {
            if views.len() != tables.len() {
                return Err(ModelError::Dimension {
                    what: "views per vertex",
                    expected: tables.len(),
                    got: views.len(),
                });
            }
            for (j, (ids, table)) in views.iter().zip(tables).enumerate() {
                if let Some(&bad) = ids.iter().find(|&&id| id >= table.rows()) {
                    return Err(ModelError::Dimension {
                        what: "symbol id",
                        expected: table.rows(),
                        got: bad,
                    });
                }
                let v = mean_of_rows(ids, table).map_err(|_| ModelError::EmptySymbols { vertex: u })?;
                x.row_mut(u)[j * dim..(j + 1) * dim].copy_from_slice(&v);
            }
        }
        Ok(x)
    }

    /// Forward pass from precomputed vertex inputs (views already
    /// concatenated, one row per vertex).
    pub fn forward_inputs(&self, input: Matrix, topology: &Topology) -> Result<ForwardPass, ModelError> {
        if input.rows() == 0 {
            return Err(ModelError::EmptyGraph);
        }
        let p = self.params;
        let conv1 = conv_apply(self.exec, &p.conv1, &input, topology, self.aggregation)?;
        let conv2 = conv_apply(self.exec, &p.conv2, &conv1.output, topology, self.aggregation)?;
        let (pooled, argmax) = dynamic_max_pool_with_argmax(&conv2.output)?;
        let mut hidden = dense_apply(&p.fc, &pooled);
        hidden.iter_mut().for_each(|h| *h = h.tanh());
        let logits = dense_apply(&p.out, &hidden);
        let probs = softmax(&logits);
        Ok(ForwardPass {
            input,
            conv1,
            conv2,
            argmax,
            pooled,
            hidden,
            probs,
        })
    }

    pub fn forward_pass(&self, graph: &EncodedGraph) -> Result<ForwardPass, ModelError> {
        let input = self.embed(graph)?;
        self.forward_inputs(input, &graph.topology)
    }

    /// Class probabilities of a graph.
    pub fn forward(&self, graph: &EncodedGraph) -> Result<Vec<f64>, ModelError> {
        self.forward_pass(graph).map(|f| f.probs)
    }

    /// Class probabilities from featurized view vectors.
    pub fn forward_views(&self, views: &NodeViews, topology: &Topology) -> Result<Vec<f64>, ModelError> {
        self.forward_inputs(views.concatenated(), topology).map(|f| f.probs)
    }

    /// Gradients of the cross-entropy loss for `label`.
    pub fn backward(&self, graph: &EncodedGraph, pass: &ForwardPass, label: usize) -> Params {
        let mut upstream = pass.probs.clone();
        upstream[label] -= 1.0;
        let mut grads = self.params.zeros_like();
        self.accumulate_gradients(graph, pass, &upstream, &mut grads);
        grads
    }

    /// Adds to `grads` the gradients induced by `upstream`, the derivative
    /// of the objective with respect to the output logits.
    pub fn accumulate_gradients(
        &self,
        graph: &EncodedGraph,
        pass: &ForwardPass,
        upstream: &[f64],
        grads: &mut Params,
    ) {
        let p = self.params;
        let exec = self.exec;

        // output layer
        for (c, &g) in upstream.iter().enumerate() {
            if g != 0.0 {
                axpy(g, &pass.hidden, grads.out.weight.row_mut(c));
            }
            grads.out.bias[c] += g;
        }
        let mut d_hidden = vec![0.0; pass.hidden.len()];
        for (c, &g) in upstream.iter().enumerate() {
            if g != 0.0 {
                axpy(g, p.out.weight.row(c), &mut d_hidden);
            }
        }

        // hidden tanh layer
        let d_pre: Vec<f64> = d_hidden
            .iter()
            .zip(&pass.hidden)
            .map(|(d, h)| d * (1.0 - h * h))
            .collect();
        let mut d_pooled = vec![0.0; pass.pooled.len()];
        for (c, &g) in d_pre.iter().enumerate() {
            if g != 0.0 {
                axpy(g, &pass.pooled, grads.fc.weight.row_mut(c));
                axpy(g, p.fc.weight.row(c), &mut d_pooled);
            }
            grads.fc.bias[c] += g;
        }

        // max pooling routes to the first argmax vertex
        let topology = &graph.topology;
        let mut d_h2 = Matrix::zeros(pass.conv2.output.rows(), pass.conv2.output.cols());
        for (k, (&u, &g)) in pass.argmax.iter().zip(&d_pooled).enumerate() {
            d_h2[(u, k)] = g;
        }

        let d_h1 = conv_backward(
            exec,
            &p.conv2,
            &pass.conv1.output,
            &pass.conv2,
            d_h2,
            topology,
            self.aggregation,
            &mut grads.conv2,
            true,
        )
        .expect("input gradient requested");
        let d_x = conv_backward(
            exec,
            &p.conv1,
            &pass.input,
            &pass.conv1,
            d_h1,
            topology,
            self.aggregation,
            &mut grads.conv1,
            !grads.embeddings.is_empty(),
        );

        // embedding rows receive their share of each vertex's view gradient
        if let Some(d_x) = d_x {
            let dim = p.embeddings.first().map_or(0, Matrix::cols);
            for (u, views) in graph.symbol_ids.iter().enumerate() {
                for (j, ids) in views.iter().enumerate() {
                    let share = 1.0 / ids.len() as f64;
                    let g = &d_x.row(u)[j * dim..(j + 1) * dim];
                    for &id in ids {
                        axpy(share, g, grads.embeddings[j].row_mut(id));
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    exec: Exec,
    layer: &ConvLayer,
    input: &Matrix,
    cache: &ConvCache,
    d_output: Matrix,
    topology: &Topology,
    aggregation: Aggregation,
    grads: &mut ConvLayer,
    need_input_grad: bool,
) -> Option<Matrix> {
    let mut d_pre = d_output;
    for (d, y) in d_pre.as_mut_slice().iter_mut().zip(cache.output.as_slice()) {
        *d *= 1.0 - y * y;
    }
    gemm_tn_acc(exec, &d_pre, input, &mut grads.w_cur);
    gemm_tn_acc(exec, &d_pre, &cache.agg_in, &mut grads.w_in);
    gemm_tn_acc(exec, &d_pre, &cache.agg_out, &mut grads.w_out);
    for u in 0..d_pre.rows() {
        axpy(1.0, d_pre.row(u), &mut grads.bias);
    }
    if !need_input_grad {
        return None;
    }

    let (n, k) = (input.rows(), input.cols());
    let mut d_cur = Matrix::zeros(n, k);
    let mut d_in = Matrix::zeros(n, k);
    let mut d_out = Matrix::zeros(n, k);
    gemm_nn_acc(exec, &d_pre, &layer.w_cur, &mut d_cur);
    gemm_nn_acc(exec, &d_pre, &layer.w_in, &mut d_in);
    gemm_nn_acc(exec, &d_pre, &layer.w_out, &mut d_out);

    // x_v reaches u's W_in term when v ∈ pred(u), i.e. u ∈ succ(v)
    let mut d_x = d_cur;
    for v in 0..n {
        for &u in &topology.succs[v] {
            let s = neighbor_scale(&topology.preds[u], aggregation);
            axpy(s, d_in.row(u), d_x.row_mut(v));
        }
        for &u in &topology.preds[v] {
            let s = neighbor_scale(&topology.succs[u], aggregation);
            axpy(s, d_out.row(u), d_x.row_mut(v));
        }
    }
    Some(d_x)
}
