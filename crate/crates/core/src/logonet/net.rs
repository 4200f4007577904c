use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::nncore::{
    conv2d_backward, conv2d_forward, fc_backward, fc_forward, pool_backward, pool_forward, relu_backward,
    relu_forward, softmax, ConvGeometry, LayerParams, NnError, ParamBundle, PoolCache, PoolKind, Scalar, Tensor,
};

pub const INPUT_SIZE: usize = 32;
pub const INPUT_CHANNELS: usize = 3;
/// Width of the first fully-connected layer, used as the embedding.
pub const FEATURE_DIM: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Conv { kernel: usize, stride: usize, padding: usize, in_channels: usize, out_channels: usize },
    /// 2x2 window, stride 2.
    Pool(PoolKind),
    Relu,
    FullyConnected { inputs: usize, outputs: usize },
    Softmax,
}

impl LayerSpec {
    pub fn is_learnable(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::FullyConnected { .. })
    }

    /// `(weight shape, bias shape)` for learnable layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Conv { kernel, in_channels, out_channels, .. } => {
                Some((vec![kernel, kernel, in_channels, out_channels], vec![out_channels]))
            }
            LayerSpec::FullyConnected { inputs, outputs } => Some((vec![inputs, outputs], vec![outputs])),
            _ => None,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv { kernel, in_channels, .. } => kernel * kernel * in_channels,
            LayerSpec::FullyConnected { inputs, .. } => inputs,
            _ => 0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Pool(PoolKind::Max) => "maxpool",
            LayerSpec::Pool(PoolKind::Avg) => "avgpool",
            LayerSpec::Relu => "relu",
            LayerSpec::FullyConnected { .. } => "fc",
            LayerSpec::Softmax => "softmax",
        }
    }
}

/// The twelve-layer stack, in order, for a given number of outputs.
pub fn layer_stack(num_outputs: usize) -> Vec<LayerSpec> {
    let conv = |cin, cout| LayerSpec::Conv { kernel: 5, stride: 1, padding: 2, in_channels: cin, out_channels: cout };
    vec![
        conv(INPUT_CHANNELS, 32),
        LayerSpec::Pool(PoolKind::Max),
        LayerSpec::Relu,
        conv(32, 32),
        LayerSpec::Relu,
        LayerSpec::Pool(PoolKind::Avg),
        conv(32, 64),
        LayerSpec::Relu,
        LayerSpec::Pool(PoolKind::Avg),
        LayerSpec::FullyConnected { inputs: 4 * 4 * 64, outputs: FEATURE_DIM },
        LayerSpec::FullyConnected { inputs: FEATURE_DIM, outputs: num_outputs },
        LayerSpec::Softmax,
    ]
}

/// Index of the layer whose output is the embedding (first fully-connected).
const FEATURE_LAYER: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Keep per-layer caches for a later backward pass.
    Train,
    Infer,
}

#[derive(Clone, Debug)]
enum LayerCache<T> {
    Input(Tensor<T>),
    Pool(PoolCache),
}

/// Result of a forward pass over a batch.
#[derive(Clone, Debug)]
pub struct Forward<T> {
    /// `N x outputs`, each row sums to one.
    pub probs: Tensor<T>,
    /// `N x 64` activations of the first fully-connected layer.
    pub features: Tensor<T>,
    caches: Vec<Option<LayerCache<T>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogoNet<T> {
    layers: Vec<LayerSpec>,
    params: ParamBundle<T>,
}

impl<T: Scalar> LogoNet<T> {
    /// Fresh network with fan-in scaled Gaussian weights (`std = sqrt(2/fan_in)`)
    /// and zero biases. Deterministic for a given seed.
    pub fn new(num_outputs: usize, seed: u64) -> Result<Self, NnError> {
        if num_outputs < 2 {
            return Err(NnError::Geometry(format!("need at least 2 outputs, got {num_outputs}")));
        }
        let layers = layer_stack(num_outputs);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamBundle::default();
        for spec in &layers {
            if let Some((wshape, bshape)) = spec.param_shapes() {
                let std = (2.0 / spec.fan_in() as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                let weight = Tensor::from_fn(&wshape, |_| T::from_f64_lossy(normal.sample(&mut rng)));
                params.layers.push(LayerParams::new(weight, Tensor::zeros(&bshape)));
            }
        }
        Ok(LogoNet { layers, params })
    }

    /// Assembles a network from explicit parameters, checking every shape.
    pub fn from_params(num_outputs: usize, weights: Vec<(Tensor<T>, Tensor<T>)>) -> Result<Self, NnError> {
        let layers = layer_stack(num_outputs);
        let shapes: Vec<_> = layers.iter().filter_map(LayerSpec::param_shapes).collect();
        if shapes.len() != weights.len() {
            return Err(NnError::ShapeMismatch {
                what: "learnable layer count",
                expected: vec![shapes.len()],
                found: vec![weights.len()],
            });
        }
        let mut params = ParamBundle::default();
        for ((ws, bs), (w, b)) in shapes.into_iter().zip(weights) {
            if w.shape() != ws.as_slice() {
                return Err(NnError::ShapeMismatch { what: "layer weight", expected: ws, found: w.shape().to_vec() });
            }
            if b.shape() != bs.as_slice() {
                return Err(NnError::ShapeMismatch { what: "layer bias", expected: bs, found: b.shape().to_vec() });
            }
            params.layers.push(LayerParams::new(w, b));
        }
        Ok(LogoNet { layers, params })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &ParamBundle<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamBundle<T> {
        &mut self.params
    }

    pub fn num_outputs(&self) -> usize {
        match self.layers[FEATURE_LAYER + 1] {
            LayerSpec::FullyConnected { outputs, .. } => outputs,
            _ => unreachable!("layer stack is fixed"),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    /// Converts the parameters to another scalar type (momentum is reset).
    pub fn cast<U: Scalar>(&self) -> LogoNet<U> {
        let weights = self.params.layers.iter().map(|l| (l.weight.cast(), l.bias.cast())).collect();
        LogoNet::from_params(self.num_outputs(), weights).expect("same architecture")
    }

    fn check_input(batch: &Tensor<T>) -> Result<(), NnError> {
        let ok = match *batch.shape() {
            [h, w, c] | [_, h, w, c] => h == INPUT_SIZE && w == INPUT_SIZE && c == INPUT_CHANNELS,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(NnError::ShapeMismatch {
                what: "network input (N x 32 x 32 x 3)",
                expected: vec![INPUT_SIZE, INPUT_SIZE, INPUT_CHANNELS],
                found: batch.shape().to_vec(),
            })
        }
    }

    fn as_batch(batch: &Tensor<T>) -> Tensor<T> {
        if batch.rank() == 3 {
            let mut shape = vec![1];
            shape.extend_from_slice(batch.shape());
            batch.clone().reshape(&shape).expect("same length")
        } else {
            batch.clone()
        }
    }

    /// Runs layers `[0, end)` and returns the activation after layer `end - 1`.
    fn run_layers(
        &self,
        mut x: Tensor<T>,
        range: std::ops::Range<usize>,
        mut caches: Option<&mut Vec<Option<LayerCache<T>>>>,
        mut on_output: impl FnMut(usize, &Tensor<T>),
    ) -> Result<Tensor<T>, NnError> {
        let mut pidx = self.layers[..range.start].iter().filter(|l| l.is_learnable()).count();
        for i in range {
            let spec = self.layers[i];
            let (next, cache) = match spec {
                LayerSpec::Conv { stride, padding, .. } => {
                    let p = &self.params.layers[pidx];
                    pidx += 1;
                    let y = conv2d_forward(&x, &p.weight, &p.bias, ConvGeometry { stride, padding })?;
                    (y, LayerCache::Input(x))
                }
                LayerSpec::Pool(kind) => {
                    let (y, c) = pool_forward(&x, kind)?;
                    (y, LayerCache::Pool(c))
                }
                LayerSpec::Relu => (relu_forward(&x), LayerCache::Input(x)),
                LayerSpec::FullyConnected { .. } => {
                    let p = &self.params.layers[pidx];
                    pidx += 1;
                    (fc_forward(&x, &p.weight, &p.bias)?, LayerCache::Input(x))
                }
                LayerSpec::Softmax => (softmax(&x), LayerCache::Input(x)),
            };
            on_output(i, &next);
            if let Some(c) = caches.as_deref_mut() {
                c[i] = Some(cache);
            }
            x = next;
        }
        Ok(x)
    }

    /// Forward pass over `N x 32 x 32 x 3` (or a single `32 x 32 x 3` crop).
    pub fn forward(&self, batch: &Tensor<T>, mode: Mode) -> Result<Forward<T>, NnError> {
        Self::check_input(batch)?;
        let mut caches = vec![None; self.layers.len()];
        let mut features = None;
        let probs = self.run_layers(
            Self::as_batch(batch),
            0..self.layers.len(),
            (mode == Mode::Train).then_some(&mut caches),
            |i, y| {
                if i == FEATURE_LAYER {
                    features = Some(y.clone());
                }
            },
        )?;
        Ok(Forward { probs, features: features.expect("feature layer runs"), caches })
    }

    /// Class probabilities, `N x outputs`.
    pub fn predict(&self, batch: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Ok(self.forward(batch, Mode::Infer)?.probs)
    }

    /// Pre-softmax activations, `N x outputs`.
    pub fn logits(&self, batch: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Self::check_input(batch)?;
        self.run_layers(Self::as_batch(batch), 0..self.layers.len() - 1, None, |_, _| {})
    }

    /// Output of the network truncated after the first fully-connected layer
    /// (the final fully-connected layer and softmax removed), `N x 64`.
    pub fn features_batch(&self, batch: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        Self::check_input(batch)?;
        self.run_layers(Self::as_batch(batch), 0..FEATURE_LAYER + 1, None, |_, _| {})
    }

    /// 64-dimensional embedding of one `32 x 32 x 3` crop.
    pub fn extract_features(&self, crop: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        if crop.rank() != 3 {
            return Err(NnError::ShapeMismatch {
                what: "single crop",
                expected: vec![INPUT_SIZE, INPUT_SIZE, INPUT_CHANNELS],
                found: crop.shape().to_vec(),
            });
        }
        self.features_batch(crop)?.reshape(&[FEATURE_DIM])
    }

    /// Completes the forward pass from `N x 64` features to probabilities.
    pub fn head(&self, features: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let x = if features.rank() == 1 { features.clone().reshape(&[1, features.len()])? } else { features.clone() };
        self.run_layers(x, FEATURE_LAYER + 1..self.layers.len(), None, |_, _| {})
    }

    /// Backpropagates `grad_logits` (`N x outputs`, gradient with respect to
    /// the pre-softmax activations) through a training-mode forward pass.
    /// Returns per learnable layer `(grad_weight, grad_bias)`.
    pub fn backward(&self, fwd: &Forward<T>, grad_logits: &Tensor<T>) -> Result<Vec<(Tensor<T>, Tensor<T>)>, NnError> {
        if grad_logits.shape() != fwd.probs.shape() {
            return Err(NnError::ShapeMismatch {
                what: "logit gradient",
                expected: fwd.probs.shape().to_vec(),
                found: grad_logits.shape().to_vec(),
            });
        }
        let last = self.layers.len() - 1;
        debug_assert_eq!(self.layers[last], LayerSpec::Softmax);
        let mut grads = Vec::with_capacity(self.params.layers.len());
        let mut pidx = self.params.layers.len();
        let mut g = grad_logits.clone();
        for i in (0..last).rev() {
            let cache = fwd.caches.get(i).and_then(Option::as_ref).ok_or(NnError::MissingCache { layer: i })?;
            g = match (self.layers[i], cache) {
                (LayerSpec::Conv { stride, padding, .. }, LayerCache::Input(x)) => {
                    pidx -= 1;
                    let cg = conv2d_backward(&g, x, &self.params.layers[pidx].weight, ConvGeometry { stride, padding })?;
                    grads.push((cg.weights, cg.bias));
                    cg.input
                }
                (LayerSpec::FullyConnected { .. }, LayerCache::Input(x)) => {
                    pidx -= 1;
                    let fg = fc_backward(&g, x, &self.params.layers[pidx].weight)?;
                    grads.push((fg.weights, fg.bias));
                    fg.input
                }
                (LayerSpec::Relu, LayerCache::Input(x)) => relu_backward(&g, x)?,
                (LayerSpec::Pool(_), LayerCache::Pool(c)) => pool_backward(&g, c)?,
                _ => return Err(NnError::MissingCache { layer: i }),
            };
        }
        grads.reverse();
        Ok(grads)
    }
}
