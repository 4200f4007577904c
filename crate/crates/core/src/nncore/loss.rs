use super::{NnError, Scalar, Tensor};

/// Lower clamp on the target probability before taking its logarithm.
const MIN_PROB: f64 = 1e-12;

/// In-place max-subtracted softmax over one row of logits.
pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Softmax over the last axis of a rank-1 or rank-2 tensor.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let width = *logits.shape().last().expect("tensor rank >= 1");
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(width) {
        softmax_in_place(row);
    }
    out
}

/// `-weight * ln(p[target])` and its gradient with respect to the logits
/// that produced `probs`.
pub fn weighted_cross_entropy<T: Scalar>(probs: &[T], target: usize, weight: T) -> Result<(T, Vec<T>), NnError> {
    if target >= probs.len() {
        return Err(NnError::TargetOutOfRange { target, classes: probs.len() });
    }
    let p = probs[target].max(T::from_f64_lossy(MIN_PROB));
    let loss = if weight == T::zero() { T::zero() } else { -weight * p.ln() };
    let grad = probs
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let onehot = if i == target { T::one() } else { T::zero() };
            weight * (q - onehot)
        })
        .collect();
    Ok((loss, grad))
}
