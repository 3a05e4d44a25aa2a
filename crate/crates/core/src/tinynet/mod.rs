//! A small feed-forward network engine: dense and 2-D convolution layers,
//! ReLU/LeakyReLU/Sigmoid activations, mini-batch training on binary
//! cross-entropy, finite-difference gradient checking and a versioned binary
//! model file.
//!
//! Everything runs in `f64` on one sample at a time.

mod gradcheck;
mod io;
mod layer;
mod network;
mod tensor;
mod train;

use thiserror::Error;

pub use gradcheck::gradient_check;
pub use io::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use layer::{LayerSpec, Padding, LEAKY_SLOPE};
pub use network::{ModelMetadata, NetworkModel, Standardization};
pub use tensor::Tensor;
pub use train::{mean_loss, train, Loss, Optimizer, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("tensor: {0}")]
    Tensor(String),
    #[error("architecture: {0}")]
    Architecture(String),
    #[error("shape mismatch at layer {layer}: expected {expected:?}, found {found:?}")]
    Shape {
        layer: usize,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("training configuration: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("sample {index} has label {value}, expected 0 or 1")]
    Label { index: usize, value: f64 },
    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u8),
    #[error("model file truncated while reading {0}")]
    Truncated(String),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
