//! Minimal dense-tensor neural network kernels: convolution, pooling, ReLU,
//! fully-connected layers, softmax, weighted cross-entropy and momentum SGD.
//!
//! Every kernel is a pure function over [`Tensor`] values; the stateful
//! pieces (parameters, gradients, velocities) live in [`ParamBundle`].

mod activation;
mod conv;
mod dense;
mod loss;
mod pool;
mod scalar;
mod sgd;
mod tensor;

pub use activation::{relu_backward, relu_forward};
pub use conv::{conv2d_backward, conv2d_forward, ConvGeometry, ConvGrads};
pub use dense::{fc_backward, fc_forward, FcGrads};
pub use loss::{softmax, softmax_in_place, weighted_cross_entropy};
pub use pool::{pool_backward, pool_forward, PoolCache, PoolKind};
pub use scalar::{MatRef, Scalar};
pub use sgd::{sgd_step, LayerParams, ParamBundle};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("invalid tensor shape {0:?}: extents must be positive")]
    InvalidShape(Vec<usize>),
    #[error("shape {shape:?} needs {} elements, got {len}", shape.iter().product::<usize>())]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{what}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch { what: &'static str, expected: Vec<usize>, found: Vec<usize> },
    #[error("input has {found} channels but the layer expects {expected}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("invalid convolution geometry: {0}")]
    Geometry(String),
    #[error("pooling needs even spatial extents, got {height}x{width}")]
    OddExtent { height: usize, width: usize },
    #[error("layer {layer} has no forward cache; run the forward pass in training mode first")]
    MissingCache { layer: usize },
    #[error("target class {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("empty batch")]
    EmptyBatch,
}

/// Splits an activation tensor into `(batch, height, width, channels)`.
/// Rank-3 inputs are a batch of one.
pub(crate) fn spatial_dims<T: Scalar>(t: &Tensor<T>) -> Result<(usize, usize, usize, usize), NnError> {
    match *t.shape() {
        [h, w, c] => Ok((1, h, w, c)),
        [n, h, w, c] => Ok((n, h, w, c)),
        ref other => Err(NnError::ShapeMismatch {
            what: "spatial input (H x W x C or N x H x W x C)",
            expected: vec![0, 0, 0, 0],
            found: other.to_vec(),
        }),
    }
}

/// Builds the output shape matching the batching convention of `like`.
pub(crate) fn spatial_shape<T: Scalar>(like: &Tensor<T>, n: usize, h: usize, w: usize, c: usize) -> Vec<usize> {
    if like.rank() == 3 {
        vec![h, w, c]
    } else {
        vec![n, h, w, c]
    }
}
