//! Soft min-cost flow model: quantized token embeddings, a post-norm
//! self-attention encoder with clipped relative positions on keys and
//! values, and a head that scores every sample against one decision
//! representative per output position plus the terminal.

mod checkpoint;
mod config;
mod loss;
mod model;
mod params;

pub use config::ModelConfig;
pub use loss::{flow_loss, LossBreakdown, LossWeights, LOG_EPS};
pub use model::{backward, encoder_forward, head_forward, mean_loss, quantize, quantize_embed, Model, Sample};
pub use params::{LayerParams, ModelParameters, INIT_STD};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_VERSION};
