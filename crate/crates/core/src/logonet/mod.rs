//! The logo classifier network: three 5x5 convolution blocks followed by two
//! fully-connected layers and a softmax over the logo classes plus background.
//!
//! ```text
//! conv 32@5x5 -> maxpool/2 -> relu -> conv 32@5x5 -> relu -> avgpool/2
//!   -> conv 64@5x5 -> relu -> avgpool/2 -> fc 64 -> fc C -> softmax
//! ```
//!
//! All convolutions pad by 2 so only the pools change spatial extent
//! (32 -> 16 -> 8 -> 4), giving 147,073 parameters for 33 outputs.

mod model;
mod net;

pub use model::{load_model, load_model_expecting, save_model, Model, ModelError, MODEL_MAGIC, MODEL_VERSION};
pub use net::{layer_stack, Forward, LayerSpec, LogoNet, Mode, FEATURE_DIM, INPUT_CHANNELS, INPUT_SIZE};

/// Output count of the full-size network: 32 logo brands plus background.
pub const DEFAULT_OUTPUTS: usize = 33;

/// Learnable parameters of a `k x k` convolution from `cin` to `cout` channels.
pub fn conv_param_count(k: usize, cin: usize, cout: usize) -> usize {
    k * k * cin * cout + cout
}

/// Learnable parameters of a fully-connected layer from `n` to `m` units.
pub fn fc_param_count(n: usize, m: usize) -> usize {
    n * m + m
}
