//! Policy networks: the DS-RNN and its RNN+Attn ablation, parameter
//! storage, gradients and the checkpoint container.

mod ablation;
pub mod checkpoint;
mod dsrnn;
mod grad;
mod model;
mod params;
pub mod tape;

pub use ablation::forward_ablation;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use dsrnn::forward as forward_dsrnn;
pub use grad::{gradients, FrameGrad, FrameLoss, Segment};
pub use model::{forward, HiddenState, PolicyOutput};
pub use params::{Arch, Gradients, NetConfig, ParamId, PolicyParams, Tensor};
