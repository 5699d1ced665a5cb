//! MOS regression for synthesized singing over frozen pre-trained-model embeddings.
//!
//! Everything is implemented from scratch on `f64` buffers: layers with manual
//! backward passes ([`nn`]), the four regression heads ([`model`]), the binary
//! embedding and checkpoint formats ([`data`], [`checkpoint`]), training and
//! evaluation ([`train`]), experiment grids ([`grid`]) and the `batchmos`
//! command line ([`cli`]).
//!
//! Runnable examples live in `examples/`:
//!
//! - `gradient_check`: finite-difference checks of every layer and loss
//! - `bhattacharyya`: the distance, its clamp and its gradient
//! - `embedding_files`: writing, inspecting and re-reading SMOS files
//! - `synthetic_pipeline`: planted-signal data through a trained BatchFusion model
//! - `fusion_ablation`: BatchFusion with the gate and alignment term switched off
//! - `grid_runner`: a small grid over synthetic embedding files

pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod grid;
pub mod model;
pub mod nn;
pub mod ptm;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{ForwardOutput, Model, ModelKind, ModelSpec};
pub use tensor::Tensor;
