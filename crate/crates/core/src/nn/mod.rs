//! Minimal dense numerics and the small CNNs used by the FDF experiments.

mod checkpoint;
mod conv;
mod dense;
mod network;
mod tensor;
mod train;

pub use checkpoint::{
    load_checkpoint, load_checkpoint_expecting, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use conv::{sparse_conv_forward, SparseConvLayer};
pub use dense::DenseLayer;
pub use network::{argmax, loss, softmax, Architecture, Gradients, LossKind, Network, NetworkShape};
pub use tensor::{Real, Tensor};
pub use train::{accuracy, train, TrainConfig};
