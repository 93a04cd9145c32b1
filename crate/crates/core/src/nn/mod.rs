//! Minimal neural-network engine: dense and convolutional layers with
//! hand-written gradients, Adam, mini-batch training and a weight container.

pub mod adam;
pub mod container;
pub mod layers;
pub mod models;
pub mod train;

pub use adam::{AdamConfig, AdamState};
pub use container::{Dims, ModelParams, SCHEMA_VERSION};
pub use layers::{Activation, DenseLayer, LRELU_SLOPE};
pub use models::{hard_decision, predict_chunked, ConvSpec, Mlp, SenNet, Trainable};
pub use train::{evaluate, train, EpochLog, TrainConfig, TrainOutcome};
