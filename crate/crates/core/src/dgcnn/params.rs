use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{init_embeddings, Vocabulary};
use crate::linalg::Matrix;

use super::hyper::{ModelDims, ParameterCount};

/// One directed graph convolution: separate weights for the vertex itself,
/// its predecessors and its successors, plus a shared bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub w_cur: Matrix,
    pub w_in: Matrix,
    pub w_out: Matrix,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        ConvLayer {
            w_cur: Matrix::zeros(outputs, inputs),
            w_in: Matrix::zeros(outputs, inputs),
            w_out: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    pub fn outputs(&self) -> usize {
        self.w_cur.rows()
    }

    pub fn inputs(&self) -> usize {
        self.w_cur.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Dense {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }
}

/// All learnable tensors of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// One table per view, rows indexed by vocabulary id.
    pub embeddings: Vec<Matrix>,
    pub conv1: ConvLayer,
    pub conv2: ConvLayer,
    pub fc: Dense,
    pub out: Dense,
}

/// Borrowed view of one named tensor.
#[derive(Debug)]
pub struct TensorRef<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| if bound > 0.0 { rng.random_range(-bound..=bound) } else { 0.0 })
        .collect();
    Matrix::from_vec(rows, cols, data)
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    if fan_in + fan_out == 0 {
        0.0
    } else {
        (6.0 / (fan_in + fan_out) as f64).sqrt()
    }
}

impl Params {
    /// All-zero tensors with the given shapes.
    pub fn zeros(dims: ModelDims, vocab_sizes: &[usize], token_dim: usize) -> Self {
        Params {
            embeddings: vocab_sizes
                .iter()
                .map(|&n| Matrix::zeros(n, token_dim))
                .collect(),
            conv1: ConvLayer::zeros(dims.conv1, dims.input),
            conv2: ConvLayer::zeros(dims.conv2, dims.conv1),
            fc: Dense::zeros(dims.fc, dims.conv2),
            out: Dense::zeros(dims.classes, dims.fc),
        }
    }

    /// Same shapes as `self`, all zeros.
    pub fn zeros_like(&self) -> Self {
        let token_dim = self.embeddings.first().map_or(0, Matrix::cols);
        let sizes: Vec<usize> = self.embeddings.iter().map(Matrix::rows).collect();
        Params::zeros(self.dims(), &sizes, token_dim)
    }

    /// Seeded initialization: embeddings uniform on `[-0.1, 0.1]`, weights
    /// Glorot-uniform, biases zero.
    pub fn init(dims: ModelDims, vocabs: &[Vocabulary], token_dim: usize, seed: u64) -> Self {
        let embeddings = vocabs
            .iter()
            .map(|v| init_embeddings(v, token_dim, derive_seed(seed, v.view().id() as u64)).matrix)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5745_4947));
        let conv = |outputs, inputs, rng: &mut ChaCha8Rng| {
            let bound = glorot(3 * inputs, outputs);
            ConvLayer {
                w_cur: uniform(outputs, inputs, bound, rng),
                w_in: uniform(outputs, inputs, bound, rng),
                w_out: uniform(outputs, inputs, bound, rng),
                bias: vec![0.0; outputs],
            }
        };
        let dense = |outputs, inputs, rng: &mut ChaCha8Rng| Dense {
            weight: uniform(outputs, inputs, glorot(inputs, outputs), rng),
            bias: vec![0.0; outputs],
        };
        let conv1 = conv(dims.conv1, dims.input, &mut rng);
        let conv2 = conv(dims.conv2, dims.conv1, &mut rng);
        let fc = dense(dims.fc, dims.conv2, &mut rng);
        let out = dense(dims.classes, dims.fc, &mut rng);
        Params {
            embeddings,
            conv1,
            conv2,
            fc,
            out,
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            input: self.conv1.inputs(),
            conv1: self.conv1.outputs(),
            conv2: self.conv2.outputs(),
            fc: self.fc.weight.rows(),
            classes: self.out.weight.rows(),
        }
    }

    /// Counts the entries actually held by the weight matrices and bias
    /// vectors. Embedding tables are not included.
    pub fn count_parameters(&self) -> ParameterCount {
        let mut count = ParameterCount {
            weights: 0,
            biases: 0,
        };
        for t in self.tensors() {
            if t.name.starts_with("embedding") {
                continue;
            }
            if t.name.ends_with(".bias") {
                count.biases += t.data.len();
            } else {
                count.weights += t.data.len();
            }
        }
        count
    }

    // Order shared by `tensors` and `tensors_mut`.
    fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.embeddings.len())
            .map(|v| format!("embedding.view{v}"))
            .collect();
        for layer in ["conv1", "conv2"] {
            for part in ["w_cur", "w_in", "w_out", "bias"] {
                names.push(format!("{layer}.{part}"));
            }
        }
        for layer in ["fc", "out"] {
            for part in ["weight", "bias"] {
                names.push(format!("{layer}.{part}"));
            }
        }
        names
    }

    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut data: Vec<(usize, usize, &[f64])> = self
            .embeddings
            .iter()
            .map(|m| (m.rows(), m.cols(), m.as_slice()))
            .collect();
        for layer in [&self.conv1, &self.conv2] {
            for m in [&layer.w_cur, &layer.w_in, &layer.w_out] {
                data.push((m.rows(), m.cols(), m.as_slice()));
            }
            data.push((layer.bias.len(), 1, &layer.bias));
        }
        for layer in [&self.fc, &self.out] {
            data.push((layer.weight.rows(), layer.weight.cols(), layer.weight.as_slice()));
            data.push((layer.bias.len(), 1, &layer.bias));
        }
        self.names()
            .into_iter()
            .zip(data)
            .map(|(name, (rows, cols, data))| TensorRef {
                name,
                rows,
                cols,
                data,
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let names = self.names();
        let mut data: Vec<&mut [f64]> = self
            .embeddings
            .iter_mut()
            .map(Matrix::as_mut_slice)
            .collect();
        for layer in [&mut self.conv1, &mut self.conv2] {
            data.push(layer.w_cur.as_mut_slice());
            data.push(layer.w_in.as_mut_slice());
            data.push(layer.w_out.as_mut_slice());
            data.push(&mut layer.bias);
        }
        for layer in [&mut self.fc, &mut self.out] {
            data.push(layer.weight.as_mut_slice());
            data.push(&mut layer.bias);
        }
        names.into_iter().zip(data).collect()
    }

    /// `self += alpha * other`, optionally leaving embeddings untouched.
    pub fn add_scaled(&mut self, alpha: f64, other: &Params, include_embeddings: bool) {
        let src = other.tensors();
        for ((name, dst), s) in self.tensors_mut().into_iter().zip(src) {
            if !include_embeddings && name.starts_with("embedding") {
                continue;
            }
            crate::linalg::axpy(alpha, s.data, dst);
        }
    }

    pub fn fill_zero(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }
}
