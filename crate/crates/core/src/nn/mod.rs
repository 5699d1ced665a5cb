//! Differentiable building blocks with hand-written backward passes.

pub mod activation;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub(crate) mod linalg;
pub mod loss;
pub mod params;

pub use activation::{dropout, gate, relu, sigmoid, softmax, Dropout, Gate, Relu};
pub use conv::{conv1d, maxpool1d, Conv1d, MaxPool1d};
pub use dense::{dense, Dense};
pub use gradcheck::{grad_check, max_relative_error, numeric_gradient};
pub use loss::{bhattacharyya_backward, bhattacharyya_distance, mse_loss, LossBreakdown, BD_EPS};
pub use params::{adam_step, AdamConfig, LayerParams};
