//! A small graph neural network with hand-written gradients.
//!
//! Two layer types are provided, [`GcnLayer`] and [`GatLayer`]; others can
//! be added by implementing [`GraphLayer`].

mod config;
mod layers;
mod model;
mod params;
mod train;

pub use config::{Architecture, ModelConfig, GAT_PATIENCE};
pub use layers::{AttentionGraph, Dropout, GatCache, GatLayer, GcnLayer, GraphLayer, LayerInput};
pub use model::{
    argmax_rows, cross_entropy, forward, loss_and_grads, softmax, softmax_rows, PreparedGraph, Propagation,
    TrainingMask,
};
pub use params::{Checkpoint, InitRecord, LayerParams, ModelParams, TensorRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use train::{train, train_prepared, PreparedOutcome, TrainOutcome};
