use crate::nncore::{Scalar, Tensor};

/// Smallest standard deviation used when normalising.
pub const MIN_STD: f64 = 1e-6;

/// Per-channel mean and standard deviation over a set of `H x W x 3` crops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl NormStats {
    pub fn identity() -> Self {
        NormStats { mean: [0.0; 3], std: [1.0; 3] }
    }
}

/// Population statistics over every pixel of every crop, per channel.
/// Standard deviations are clamped below at [`MIN_STD`].
pub fn compute_norm_stats<'a, T: Scalar>(crops: impl IntoIterator<Item = &'a Tensor<T>>) -> NormStats {
    let mut count = 0usize;
    let mut sum = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    let mut shift: Option<[f64; 3]> = None;
    for crop in crops {
        for px in crop.data().chunks(3) {
            // shifted accumulation keeps the variance accurate for large means
            let k = *shift.get_or_insert([px[0].to_f64_lossy(), px[1].to_f64_lossy(), px[2].to_f64_lossy()]);
            for c in 0..3 {
                let d = px[c].to_f64_lossy() - k[c];
                sum[c] += d;
                sq[c] += d * d;
            }
            count += 1;
        }
    }
    let Some(k) = shift else {
        return NormStats::identity();
    };
    let n = count as f64;
    let mut stats = NormStats::identity();
    for c in 0..3 {
        let m = sum[c] / n;
        stats.mean[c] = k[c] + m;
        stats.std[c] = (sq[c] / n - m * m).max(0.0).sqrt().max(MIN_STD);
    }
    stats
}

/// `(x - mean) / std` per channel.
pub fn apply_norm<T: Scalar>(crop: &Tensor<T>, stats: &NormStats) -> Tensor<T> {
    let mut out = crop.clone();
    for px in out.data_mut().chunks_mut(3) {
        for c in 0..3 {
            px[c] = T::from_f64_lossy((px[c].to_f64_lossy() - stats.mean[c]) / stats.std[c]);
        }
    }
    out
}

/// Inverse of [`apply_norm`].
pub fn invert_norm<T: Scalar>(crop: &Tensor<T>, stats: &NormStats) -> Tensor<T> {
    let mut out = crop.clone();
    for px in out.data_mut().chunks_mut(3) {
        for c in 0..3 {
            px[c] = T::from_f64_lossy(px[c].to_f64_lossy() * stats.std[c] + stats.mean[c]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_set_normalises_to_zero() {
        let crops = vec![Tensor::<f64>::filled(&[4, 4, 3], 0.3); 3];
        let s = compute_norm_stats(&crops);
        assert_eq!(s.std, [MIN_STD; 3]);
        assert!(apply_norm(&crops[0], &s).data().iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn hand_computed_two_crop_set() {
        // channel 0 values {0, 1}, channel 1 values {2, 2}, channel 2 values {0, 4}
        let a = Tensor::new(vec![1, 1, 3], vec![0.0, 2.0, 0.0]).unwrap();
        let b = Tensor::new(vec![1, 1, 3], vec![1.0, 2.0, 4.0]).unwrap();
        let s = compute_norm_stats([&a, &b]);
        assert_eq!(s.mean, [0.5, 2.0, 2.0]);
        assert_eq!(s.std, [0.5, MIN_STD, 2.0]);
    }

    #[test]
    fn invertible() {
        let x = Tensor::<f64>::from_fn(&[5, 5, 3], |i| (i as f64 * 0.77).sin() * 0.5 + 0.5);
        let s = NormStats { mean: [0.4, 0.5, 0.6], std: [0.2, 0.3, 0.1] };
        let back = invert_norm(&apply_norm(&x, &s), &s);
        for (a, b) in back.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
