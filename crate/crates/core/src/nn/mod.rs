//! A small dense-tensor engine: the layer vocabulary of the twin
//! auto-encoder and the static classifier, a recording forward pass with
//! exact reverse-mode gradients, Adam, and a finite-difference checker.

mod adam;
mod gradcheck;
mod layers;
mod loss;
mod network;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{check_network, gradient_check};
pub use layers::{maxpool1d, upsample1d, Conv1d, Dense, Layer};
pub use loss::{mse_loss, relu, softmax_cross_entropy};
pub use network::{Gradients, Network, Tape};
pub use tensor::Tensor;
