use super::{spatial_dims, spatial_shape, MatRef, NnError, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    /// Stride 1 with `kernel / 2` padding: spatial extents are preserved.
    pub fn same(kernel: usize) -> Self {
        ConvGeometry { stride: 1, padding: kernel / 2 }
    }
}

#[derive(Clone, Copy, Debug)]
struct Dims {
    n: usize,
    h: usize,
    w: usize,
    cin: usize,
    k: usize,
    cout: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
}

impl Dims {
    fn patch(&self) -> usize {
        self.k * self.k * self.cin
    }
    fn pixels(&self) -> usize {
        self.oh * self.ow
    }
}

fn output_extent(len: usize, k: usize, g: ConvGeometry) -> Result<usize, NnError> {
    if g.stride == 0 {
        return Err(NnError::Geometry("stride must be positive".into()));
    }
    let padded = len + 2 * g.padding;
    if padded < k {
        return Err(NnError::Geometry(format!("kernel {k} larger than padded extent {padded}")));
    }
    if (padded - k) % g.stride != 0 {
        return Err(NnError::Geometry(format!(
            "(extent {len} + 2*{} - {k}) not divisible by stride {}",
            g.padding, g.stride
        )));
    }
    Ok((padded - k) / g.stride + 1)
}

fn conv_dims<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, g: ConvGeometry) -> Result<Dims, NnError> {
    let (n, h, w, c) = spatial_dims(input)?;
    let [k, k2, cin, cout] = *weights.shape() else {
        return Err(NnError::ShapeMismatch {
            what: "conv weights (k x k x Cin x Cout)",
            expected: vec![0, 0, 0, 0],
            found: weights.shape().to_vec(),
        });
    };
    if k != k2 {
        return Err(NnError::Geometry(format!("kernel must be square, got {k}x{k2}")));
    }
    if c != cin {
        return Err(NnError::ChannelMismatch { expected: cin, found: c });
    }
    let oh = output_extent(h, k, g)?;
    let ow = output_extent(w, k, g)?;
    Ok(Dims { n, h, w, cin, k, cout, oh, ow, stride: g.stride, pad: g.padding })
}

/// Unrolls one `H x W x Cin` sample into a `(oh*ow) x (k*k*Cin)` patch matrix
/// whose column order matches the `k x k x Cin` weight layout.
fn im2col<T: Scalar>(sample: &[T], d: &Dims, cols: &mut [T]) {
    let patch = d.patch();
    for oy in 0..d.oh {
        for ox in 0..d.ow {
            let row = &mut cols[(oy * d.ow + ox) * patch..][..patch];
            for ky in 0..d.k {
                let iy = (oy * d.stride + ky) as isize - d.pad as isize;
                for kx in 0..d.k {
                    let ix = (ox * d.stride + kx) as isize - d.pad as isize;
                    let dst = &mut row[(ky * d.k + kx) * d.cin..][..d.cin];
                    if iy < 0 || ix < 0 || iy >= d.h as isize || ix >= d.w as isize {
                        dst.fill(T::zero());
                    } else {
                        let src = (iy as usize * d.w + ix as usize) * d.cin;
                        dst.copy_from_slice(&sample[src..src + d.cin]);
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the sample.
fn col2im<T: Scalar>(cols: &[T], d: &Dims, sample: &mut [T]) {
    let patch = d.patch();
    for oy in 0..d.oh {
        for ox in 0..d.ow {
            let row = &cols[(oy * d.ow + ox) * patch..][..patch];
            for ky in 0..d.k {
                let iy = (oy * d.stride + ky) as isize - d.pad as isize;
                if iy < 0 || iy >= d.h as isize {
                    continue;
                }
                for kx in 0..d.k {
                    let ix = (ox * d.stride + kx) as isize - d.pad as isize;
                    if ix < 0 || ix >= d.w as isize {
                        continue;
                    }
                    let src = &row[(ky * d.k + kx) * d.cin..][..d.cin];
                    let dst = (iy as usize * d.w + ix as usize) * d.cin;
                    for (o, &g) in sample[dst..dst + d.cin].iter_mut().zip(src) {
                        *o += g;
                    }
                }
            }
        }
    }
}

/// 2-D cross-correlation (no kernel flip) plus per-channel bias.
///
/// `input` is `H x W x Cin` or `N x H x W x Cin`, `weights` is
/// `k x k x Cin x Cout`, `bias` has `Cout` entries.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    geometry: ConvGeometry,
) -> Result<Tensor<T>, NnError> {
    let d = conv_dims(input, weights, geometry)?;
    if bias.len() != d.cout {
        return Err(NnError::ShapeMismatch { what: "conv bias", expected: vec![d.cout], found: bias.shape().to_vec() });
    }
    let mut out = Tensor::zeros(&spatial_shape(input, d.n, d.oh, d.ow, d.cout));
    let mut cols = vec![T::zero(); d.pixels() * d.patch()];
    let in_stride = d.h * d.w * d.cin;
    let out_stride = d.pixels() * d.cout;
    for (sample, dst) in input.data().chunks(in_stride).zip(out.data_mut().chunks_mut(out_stride)) {
        im2col(sample, &d, &mut cols);
        T::gemm(
            T::one(),
            MatRef::new(&cols, d.pixels(), d.patch()),
            MatRef::new(weights.data(), d.patch(), d.cout),
            T::zero(),
            dst,
        );
        for px in dst.chunks_mut(d.cout) {
            for (v, &b) in px.iter_mut().zip(bias.data()) {
                *v += b;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Gradients of [`conv2d_forward`] with respect to its input, weights and bias.
pub fn conv2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    geometry: ConvGeometry,
) -> Result<ConvGrads<T>, NnError> {
    let d = conv_dims(input, weights, geometry)?;
    let expected = spatial_shape(input, d.n, d.oh, d.ow, d.cout);
    if grad_out.shape() != expected.as_slice() {
        return Err(NnError::ShapeMismatch { what: "conv grad_out", expected, found: grad_out.shape().to_vec() });
    }
    let mut grad_input = Tensor::zeros(input.shape());
    let mut grad_weights = Tensor::zeros(weights.shape());
    let mut grad_bias = Tensor::zeros(&[d.cout]);
    let mut cols = vec![T::zero(); d.pixels() * d.patch()];
    let mut grad_cols = vec![T::zero(); d.pixels() * d.patch()];
    let in_stride = d.h * d.w * d.cin;
    let out_stride = d.pixels() * d.cout;
    for ((sample, g), gin) in input
        .data()
        .chunks(in_stride)
        .zip(grad_out.data().chunks(out_stride))
        .zip(grad_input.data_mut().chunks_mut(in_stride))
    {
        im2col(sample, &d, &mut cols);
        T::gemm(
            T::one(),
            MatRef::transposed(&cols, d.pixels(), d.patch()),
            MatRef::new(g, d.pixels(), d.cout),
            T::one(),
            grad_weights.data_mut(),
        );
        T::gemm(
            T::one(),
            MatRef::new(g, d.pixels(), d.cout),
            MatRef::transposed(weights.data(), d.patch(), d.cout),
            T::zero(),
            &mut grad_cols,
        );
        col2im(&grad_cols, &d, gin);
        for px in g.chunks(d.cout) {
            for (b, &v) in grad_bias.data_mut().iter_mut().zip(px) {
                *b += v;
            }
        }
    }
    Ok(ConvGrads { input: grad_input, weights: grad_weights, bias: grad_bias })
}
