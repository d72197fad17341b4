//! Joint contrastive + reconstruction training of the shaping heads.

mod adam;
mod config;
mod loss;
mod model;
mod train;
mod views;

pub use adam::{adam_step, Gradients};
pub use config::{ForwardMode, LossConfig, PairMode, TrainConfig};
pub use loss::{contrastive_loss, joint_loss, mse_loss, ContrastiveOutput};
pub use model::{resolve_device, AdamMoments, HeadInit, ModelConfig, QuantizerKind, ShapingModelState};
pub use train::{loss_and_grads, train, StepOutput, TrainingData};
pub use views::{dropout, make_views, ViewBatch};
