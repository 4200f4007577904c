//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

pub mod gradcheck;

use logorec::datamodel::BoundingBox;
use logorec::logonet::{layer_stack, LayerSpec, LogoNet};
use logorec::nncore::{conv2d_forward, fc_forward, pool_forward, relu_forward, softmax, ConvGeometry, PoolKind, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// IoU by counting covered pixels on the integer grid.
pub fn pixel_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inside = |r: &BoundingBox, x: i32, y: i32| x >= r.x && x < r.x + r.w as i32 && y >= r.y && y < r.y + r.h as i32;
    let (x0, y0) = (a.x.min(b.x), a.y.min(b.y));
    let (x1, y1) = ((a.x + a.w as i32).max(b.x + b.w as i32), (a.y + a.h as i32).max(b.y + b.h as i32));
    let (mut inter, mut union) = (0u64, 0u64);
    for y in y0..y1 {
        for x in x0..x1 {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    inter as f64 / union as f64
}

pub fn random_box(rng: &mut ChaCha8Rng, span: i32, max_extent: u32) -> BoundingBox {
    BoundingBox::new(rng.gen_range(-span..span), rng.gen_range(-span..span), rng.gen_range(1..=max_extent), rng.gen_range(1..=max_extent))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NaiveLabel {
    Positive(usize),
    Background,
    Excluded,
}

/// Labels one proposal by scanning every annotation's pixel IoU.
pub fn naive_label(p: &BoundingBox, annotations: &[(BoundingBox, usize)]) -> NaiveLabel {
    let ious: Vec<f64> = annotations.iter().map(|(a, _)| pixel_iou(p, a)).collect();
    if ious.iter().all(|&v| v == 0.0) {
        return NaiveLabel::Background;
    }
    let best = ious.iter().cloned().fold(f64::MIN, f64::max);
    if best >= 0.5 {
        // first annotation attaining the maximum
        let i = ious.iter().position(|&v| v == best).unwrap();
        NaiveLabel::Positive(annotations[i].1)
    } else {
        NaiveLabel::Excluded
    }
}

/// k nearest by repeated minimum selection over (distance, index).
pub fn naive_knn(queries: &[Vec<f64>], items: &[Vec<f64>], k: usize, exclude_self: bool) -> Vec<Vec<(usize, f64)>> {
    queries
        .iter()
        .enumerate()
        .map(|(q, f)| {
            let mut taken = vec![false; items.len()];
            if exclude_self {
                taken[q] = true;
            }
            let mut out = Vec::new();
            while out.len() < k {
                let mut best: Option<(usize, f64)> = None;
                for (j, g) in items.iter().enumerate() {
                    if taken[j] {
                        continue;
                    }
                    let d = f.iter().zip(g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    if best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((j, d));
                    }
                }
                let Some((j, d)) = best else { break };
                taken[j] = true;
                out.push((j, d));
            }
            out
        })
        .collect()
}

/// Outcome of a finite-difference comparison.
#[derive(Clone, Copy, Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    pub excluded: usize,
    pub worst: f64,
}

impl GradReport {
    pub fn merge(&mut self, other: GradReport) {
        self.checked += other.checked;
        self.excluded += other.excluded;
        self.worst = self.worst.max(other.worst);
    }
}

/// Denominator floor keeping the relative error meaningful for vanishing gradients.
pub const REL_FLOOR: f64 = 1e-8;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Central differences of `f` at the coordinates `idx` of `x`. A coordinate
/// is skipped when `kink(x_plus, x_minus)` reports a non-smooth point inside
/// the stencil.
pub fn check_coords(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    idx: &[usize],
    h: f64,
    kink: &mut dyn FnMut(&[f64], &[f64]) -> bool,
) -> GradReport {
    let mut r = GradReport::default();
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for &i in idx {
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        if kink(&xp, &xm) {
            r.excluded += 1;
        } else {
            let numeric = (f(&xp) - f(&xm)) / (2.0 * h);
            r.worst = r.worst.max(rel_err(analytic[i], numeric));
            r.checked += 1;
        }
        xp[i] = x[i];
        xm[i] = x[i];
    }
    r
}

pub fn never(_: &[f64], _: &[f64]) -> bool {
    false
}

/// Forward pass of the logo network rebuilt from the public layer functions.
/// Returns the probabilities and the activation pattern (ReLU input signs and
/// max-pool winners) that determines which piece of the piecewise-smooth
/// function is active.
pub fn reference_forward(net: &LogoNet<f64>, batch: &Tensor<f64>) -> (Tensor<f64>, Vec<usize>) {
    let stack = layer_stack(net.num_outputs());
    let mut x = batch.clone();
    let mut pattern = Vec::new();
    let mut p = 0;
    for spec in stack {
        x = match spec {
            LayerSpec::Conv { stride, padding, .. } => {
                let l = &net.params().layers[p];
                p += 1;
                conv2d_forward(&x, &l.weight, &l.bias, ConvGeometry { stride, padding }).unwrap()
            }
            LayerSpec::FullyConnected { .. } => {
                let l = &net.params().layers[p];
                p += 1;
                fc_forward(&x, &l.weight, &l.bias).unwrap()
            }
            LayerSpec::Relu => {
                pattern.extend(x.data().iter().map(|&v| usize::from(v > 0.0)));
                relu_forward(&x)
            }
            LayerSpec::Pool(kind) => {
                if kind == PoolKind::Max {
                    pattern.extend(maxpool_winners(&x));
                }
                pool_forward(&x, kind).unwrap().0
            }
            LayerSpec::Softmax => softmax(&x),
        };
    }
    (x, pattern)
}

/// Window-relative position (0..4) of each 2x2 maximum, first one on ties.
pub fn maxpool_winners(x: &Tensor<f64>) -> Vec<usize> {
    let [n, h, w, c] = x.shape()[..] else { panic!("rank-4 input expected") };
    let at = |i: usize, y: usize, xx: usize, ch: usize| x.data()[((i * h + y) * w + xx) * c + ch];
    let mut out = Vec::new();
    for i in 0..n {
        for y in (0..h).step_by(2) {
            for xx in (0..w).step_by(2) {
                for ch in 0..c {
                    let vals = [at(i, y, xx, ch), at(i, y, xx + 1, ch), at(i, y + 1, xx, ch), at(i, y + 1, xx + 1, ch)];
                    let mut best = 0;
                    for k in 1..4 {
                        if vals[k] > vals[best] {
                            best = k;
                        }
                    }
                    out.push(best);
                }
            }
        }
    }
    out
}

/// Weighted cross-entropy summed over a batch, computed directly from the
/// probabilities.
pub fn batch_loss(probs: &Tensor<f64>, targets: &[usize], weights: &[f64]) -> f64 {
    let k = probs.shape()[1];
    targets.iter().zip(weights).enumerate().map(|(i, (&t, &w))| -w * probs.data()[i * k + t].ln()).sum()
}
