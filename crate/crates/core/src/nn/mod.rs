//! Dense matrices, reverse-mode differentiation and the layers built on them.

mod checkpoint;
mod gradcheck;
pub mod layers;
mod loss;
mod matrix;
mod optim;
mod params;
mod tape;

pub use checkpoint::{CheckpointError, ModelCheckpoint, NamedTensor, FORMAT_VERSION};
pub use gradcheck::{grad_check, GradCheckReport, RELATIVE_FLOOR};
pub use layers::{Attention, DecoderLayer, FeedForward, LayerNorm, Linear, TransformerLayer};
pub use loss::cross_entropy;
pub use matrix::{Matrix, ShapeError};
pub use optim::{ConfigError, Optimizer, OptimizerKind, TrainConfig};
pub use params::{ParamGrads, ParamId, ParamStore, Parameter};
pub use tape::{Grads, Tape, Var, LAYER_NORM_EPS};
