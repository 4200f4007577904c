use super::{MatRef, NnError, Scalar, Tensor};

fn rows_and_width<T: Scalar>(input: &Tensor<T>) -> (usize, usize) {
    if input.rank() == 1 {
        (1, input.len())
    } else {
        (input.shape()[0], input.len() / input.shape()[0])
    }
}

fn check_weights<T: Scalar>(weights: &Tensor<T>, inputs: usize) -> Result<usize, NnError> {
    match *weights.shape() {
        [n, m] if n == inputs => Ok(m),
        _ => Err(NnError::ShapeMismatch {
            what: "fully-connected weights (inputs x outputs)",
            expected: vec![inputs, weights.shape().last().copied().unwrap_or(0)],
            found: weights.shape().to_vec(),
        }),
    }
}

/// Affine map `y = W^T x + b` applied to every row.
///
/// A rank-1 input is one sample; otherwise the leading axis is the batch and
/// the remaining axes are flattened. `weights` is `inputs x outputs`.
pub fn fc_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let (rows, width) = rows_and_width(input);
    let m = check_weights(weights, width)?;
    if bias.len() != m {
        return Err(NnError::ShapeMismatch { what: "fully-connected bias", expected: vec![m], found: bias.shape().to_vec() });
    }
    let shape = if input.rank() == 1 { vec![m] } else { vec![rows, m] };
    let mut out = Tensor::zeros(&shape);
    for row in out.data_mut().chunks_mut(m) {
        row.copy_from_slice(bias.data());
    }
    T::gemm(
        T::one(),
        MatRef::new(input.data(), rows, width),
        MatRef::new(weights.data(), width, m),
        T::one(),
        out.data_mut(),
    );
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct FcGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn fc_backward<T: Scalar>(grad_out: &Tensor<T>, input: &Tensor<T>, weights: &Tensor<T>) -> Result<FcGrads<T>, NnError> {
    let (rows, width) = rows_and_width(input);
    let m = check_weights(weights, width)?;
    if grad_out.len() != rows * m {
        return Err(NnError::ShapeMismatch {
            what: "fully-connected grad_out",
            expected: vec![rows, m],
            found: grad_out.shape().to_vec(),
        });
    }
    let mut gw = Tensor::zeros(weights.shape());
    T::gemm(
        T::one(),
        MatRef::transposed(input.data(), rows, width),
        MatRef::new(grad_out.data(), rows, m),
        T::zero(),
        gw.data_mut(),
    );
    let mut gx = Tensor::zeros(input.shape());
    T::gemm(
        T::one(),
        MatRef::new(grad_out.data(), rows, m),
        MatRef::transposed(weights.data(), width, m),
        T::zero(),
        gx.data_mut(),
    );
    let mut gb = Tensor::zeros(&[m]);
    for row in grad_out.data().chunks(m) {
        for (b, &g) in gb.data_mut().iter_mut().zip(row) {
            *b += g;
        }
    }
    Ok(FcGrads { input: gx, weights: gw, bias: gb })
}
