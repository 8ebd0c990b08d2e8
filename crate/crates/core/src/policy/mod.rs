//! Convolutional actor-critic network, PPO loss gradients, Adam and the
//! binary weight format.

mod adam;
pub mod dist;
mod loss;
mod net;
mod weights;

pub use adam::{adam_step, adam_update, clip_scale, global_norm, AdamConfig, AdamState};
pub use loss::{loss_gradients, loss_value, LossError, LossHyper, LossStats, Sample};
pub use net::{Activations, ConvSpec, NetConfig, NetError, PolicyNet, Scalar, TensorInfo};
pub use weights::{load_weights, save_weights, ModelMeta, WeightsError, FORMAT_VERSION, MAGIC};
