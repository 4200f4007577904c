use super::{NnError, Scalar, Tensor};

/// Weight, bias, and their gradient and momentum buffers for one learnable layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub grad_weight: Tensor<T>,
    pub grad_bias: Tensor<T>,
    pub vel_weight: Tensor<T>,
    pub vel_bias: Tensor<T>,
}

impl<T: Scalar> LayerParams<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Self {
        LayerParams {
            grad_weight: Tensor::zeros(weight.shape()),
            grad_bias: Tensor::zeros(bias.shape()),
            vel_weight: Tensor::zeros(weight.shape()),
            vel_bias: Tensor::zeros(bias.shape()),
            weight,
            bias,
        }
    }

    pub fn count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamBundle<T> {
    pub layers: Vec<LayerParams<T>>,
}

impl<T: Scalar> ParamBundle<T> {
    pub fn count(&self) -> usize {
        self.layers.iter().map(LayerParams::count).sum()
    }

    pub fn zero_grad(&mut self) {
        for l in &mut self.layers {
            l.grad_weight.data_mut().fill(T::zero());
            l.grad_bias.data_mut().fill(T::zero());
        }
    }

    /// Clears gradient and momentum buffers, leaving only the weights.
    pub fn reset_state(&mut self) {
        self.zero_grad();
        for l in &mut self.layers {
            l.vel_weight.data_mut().fill(T::zero());
            l.vel_bias.data_mut().fill(T::zero());
        }
    }

    /// Adds per-layer `(weight, bias)` gradients into the gradient buffers.
    pub fn accumulate(&mut self, grads: &[(Tensor<T>, Tensor<T>)]) -> Result<(), NnError> {
        if grads.len() != self.layers.len() {
            return Err(NnError::ShapeMismatch {
                what: "gradient layer count",
                expected: vec![self.layers.len()],
                found: vec![grads.len()],
            });
        }
        for (l, (gw, gb)) in self.layers.iter_mut().zip(grads) {
            add_into(&mut l.grad_weight, gw, "weight gradient")?;
            add_into(&mut l.grad_bias, gb, "bias gradient")?;
        }
        Ok(())
    }
}

fn add_into<T: Scalar>(dst: &mut Tensor<T>, src: &Tensor<T>, what: &'static str) -> Result<(), NnError> {
    if dst.shape() != src.shape() {
        return Err(NnError::ShapeMismatch { what, expected: dst.shape().to_vec(), found: src.shape().to_vec() });
    }
    for (d, &s) in dst.data_mut().iter_mut().zip(src.data()) {
        *d += s;
    }
    Ok(())
}

/// Momentum SGD without weight decay: `v <- momentum*v - lr*g`, `w <- w + v`.
pub fn sgd_step<T: Scalar>(params: &mut ParamBundle<T>, lr: T, momentum: T) {
    fn update<T: Scalar>(w: &mut Tensor<T>, v: &mut Tensor<T>, g: &Tensor<T>, lr: T, momentum: T) {
        for ((w, v), &g) in w.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
            *v = momentum * *v - lr * g;
            *w += *v;
        }
    }
    for l in &mut params.layers {
        update(&mut l.weight, &mut l.vel_weight, &l.grad_weight, lr, momentum);
        update(&mut l.bias, &mut l.vel_bias, &l.grad_bias, lr, momentum);
    }
}
