//! Multi-view directed graph convolutional network.
//!
//! Architecture: embedding layer (views concatenated) → two directed graph
//! convolutions → dynamic max pooling → tanh fully-connected layer →
//! softmax. Gradients are computed analytically; training is seeded SGD.

mod hyper;
mod model;
mod network;
mod params;
mod train;

use thiserror::Error;

pub use hyper::{Aggregation, Hyperparams, ModelDims, ParameterCount};
pub use model::{fit, manifest_path, DgcnnModel, Prediction};
pub use network::{
    argmax, conv_forward, dynamic_max_pool, dynamic_max_pool_with_argmax, loss, softmax,
    ForwardPass, Network,
};
pub use params::{ConvLayer, Dense, Params, TensorRef};
pub use train::{evaluate_accuracy, train_params, EpochRecord, Example, TrainingLog};

use crate::features::FeatureError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("vertex {vertex} has an empty symbol list")]
    EmptySymbols { vertex: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training fold is empty")]
    EmptyTrainingSet,
    #[error("training diverged (non-finite loss or parameters) in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}
