//! Two-headed outcome network over a shared representation, with hand-written
//! reverse-mode gradients.

mod checkpoint;
mod forward;
mod grad;
mod params;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Standardizer, TarnetModel, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
pub use forward::{predict_cate, tarnet_forward, ForwardPass};
pub use grad::{grad_eval, gradcheck, loss_value, GradcheckReport, GradientBundle, LossSpec, GRADCHECK_FLOOR};
pub use params::{
    init_params, init_params_with, Activation, Architecture, Block, Dense, TarnetParams, HIDDEN_WIDTH,
};
