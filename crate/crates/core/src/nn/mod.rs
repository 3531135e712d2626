//! Trainable building blocks: activations, convolution, pooling, dense
//! layers, softmax cross-entropy, SGD and the network container.
//!
//! Max pooling is the plain 2×2/stride-2 maximum: the general pooled form
//! `f(β·down(x) + b)` is used with `β = 1`, `b = 0` and `f` the identity.

mod activation;
pub mod checkpoint;
pub mod layers;
mod loss;
mod network;
mod spec;
mod train;

pub use activation::{activation_backward, apply_activation, Activation};
pub use checkpoint::{deserialize_network, serialize_network};
pub use layers::{
    conv_backward, conv_forward, dense_backward, dense_forward, maxpool2x2, maxpool2x2_backward, PoolMask,
};
pub use loss::{softmax, softmax_cross_entropy};
pub use network::{init_parameters, Network, Trace};
pub use spec::{ArchitectureSpec, LayerSpec, ShapePlan};
pub use train::{batch_gradient, sgd_step, train, Example, TrainConfig, TrainReport};
