use super::{spatial_dims, spatial_shape, NnError, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PoolKind {
    Max,
    Avg,
}

/// What [`pool_backward`] needs from the forward call.
#[derive(Clone, Debug)]
pub struct PoolCache {
    pub kind: PoolKind,
    input_shape: Vec<usize>,
    /// Flat input index of each output element's maximum (max pooling only).
    argmax: Vec<usize>,
}

impl PoolCache {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }
}

/// 2x2 pooling with stride 2. Spatial extents must be even and are halved.
///
/// Max-pool ties resolve to the first element of the window in row-major order.
pub fn pool_forward<T: Scalar>(input: &Tensor<T>, kind: PoolKind) -> Result<(Tensor<T>, PoolCache), NnError> {
    let (n, h, w, c) = spatial_dims(input)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(NnError::OddExtent { height: h, width: w });
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&spatial_shape(input, n, oh, ow, c));
    let mut argmax = Vec::new();
    if kind == PoolKind::Max {
        argmax.resize(out.len(), 0);
    }
    let x = input.data();
    let quarter = T::from_f64_lossy(0.25);
    let y = out.data_mut();
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let o = ((b * oh + oy) * ow + ox) * c + ch;
                    let idx = |dy: usize, dx: usize| ((b * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                    let window = [idx(0, 0), idx(0, 1), idx(1, 0), idx(1, 1)];
                    match kind {
                        PoolKind::Max => {
                            let mut best = window[0];
                            for &i in &window[1..] {
                                if x[i] > x[best] {
                                    best = i;
                                }
                            }
                            y[o] = x[best];
                            argmax[o] = best;
                        }
                        PoolKind::Avg => {
                            y[o] = window.iter().map(|&i| x[i]).sum::<T>() * quarter;
                        }
                    }
                }
            }
        }
    }
    Ok((out, PoolCache { kind, input_shape: input.shape().to_vec(), argmax }))
}

pub fn pool_backward<T: Scalar>(grad_out: &Tensor<T>, cache: &PoolCache) -> Result<Tensor<T>, NnError> {
    let mut grad_in = Tensor::zeros(&cache.input_shape);
    let (n, h, w, c) = spatial_dims(&grad_in)?;
    let expected = spatial_shape(&grad_in, n, h / 2, w / 2, c);
    if grad_out.shape() != expected.as_slice() {
        return Err(NnError::ShapeMismatch { what: "pool grad_out", expected, found: grad_out.shape().to_vec() });
    }
    let g = grad_out.data();
    let gi = grad_in.data_mut();
    match cache.kind {
        PoolKind::Max => {
            for (o, &src) in cache.argmax.iter().enumerate() {
                gi[src] += g[o];
            }
        }
        PoolKind::Avg => {
            let quarter = T::from_f64_lossy(0.25);
            let (oh, ow) = (h / 2, w / 2);
            for b in 0..n {
                for oy in 0..oh {
                    for ox in 0..ow {
                        for ch in 0..c {
                            let v = g[((b * oh + oy) * ow + ox) * c + ch] * quarter;
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    gi[((b * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch] += v;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(grad_in)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Tensor<f64> {
        Tensor::new(vec![2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn max_and_avg_of_two_by_two() {
        assert_eq!(pool_forward(&square(), PoolKind::Max).unwrap().0.data(), &[4.0]);
        assert_eq!(pool_forward(&square(), PoolKind::Avg).unwrap().0.data(), &[2.5]);
    }

    #[test]
    fn backward_routes() {
        let up = Tensor::filled(&[1, 1, 1], 1.0);
        let (_, cache) = pool_forward(&square(), PoolKind::Max).unwrap();
        assert_eq!(pool_backward(&up, &cache).unwrap().data(), &[0.0, 0.0, 0.0, 1.0]);
        let (_, cache) = pool_forward(&square(), PoolKind::Avg).unwrap();
        assert_eq!(pool_backward(&up, &cache).unwrap().data(), &[0.25; 4]);
    }

    #[test]
    fn ties_go_to_first_in_scan_order() {
        let x = Tensor::<f64>::filled(&[2, 2, 1], 7.0);
        let (_, cache) = pool_forward(&x, PoolKind::Max).unwrap();
        let g = pool_backward(&Tensor::filled(&[1, 1, 1], 1.0), &cache).unwrap();
        assert_eq!(g.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn halves_logo_extent() {
        let x = Tensor::<f64>::zeros(&[32, 32, 32]);
        assert_eq!(pool_forward(&x, PoolKind::Max).unwrap().0.shape(), &[16, 16, 32]);
    }

    #[test]
    fn odd_extent_rejected() {
        let x = Tensor::<f64>::zeros(&[3, 4, 1]);
        assert_eq!(pool_forward(&x, PoolKind::Avg).unwrap_err(), NnError::OddExtent { height: 3, width: 4 });
    }
}
