//! Central-difference gradient checks for every layer type and the full network.

use logorec::logonet::{LogoNet, Mode};
use logorec::nncore::{
    conv2d_backward, conv2d_forward, fc_backward, fc_forward, pool_backward, pool_forward, relu_backward, relu_forward,
    softmax, weighted_cross_entropy, ConvGeometry, PoolKind, Tensor,
};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{batch_loss, check_coords, maxpool_winners, never, reference_forward, rng, GradReport};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

fn normal(shape: &[usize], r: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| StandardNormal.sample(r))
}

fn with(t: &Tensor<f64>, data: &[f64]) -> Tensor<f64> {
    Tensor::new(t.shape().to_vec(), data.to_vec()).unwrap()
}

/// `sum(y * r)`: its gradient with respect to `y` is `r`.
fn dot(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn all(n: usize) -> Vec<usize> {
    (0..n).collect()
}

pub fn conv(seed: u64, geometry: ConvGeometry, kernel: usize) -> GradReport {
    let mut r = rng(seed);
    let x = normal(&[2, 6, 6, 3], &mut r);
    let w = normal(&[kernel, kernel, 3, 4], &mut r);
    let b = normal(&[4], &mut r);
    let y = conv2d_forward(&x, &w, &b, geometry).unwrap();
    let up = normal(y.shape(), &mut r);
    let g = conv2d_backward(&up, &x, &w, geometry).unwrap();

    let mut rep = GradReport::default();
    let mut fx = |d: &[f64]| dot(&conv2d_forward(&with(&x, d), &w, &b, geometry).unwrap(), &up);
    rep.merge(check_coords(&mut fx, x.data(), g.input.data(), &all(x.len()), STEP, &mut never));
    let mut fw = |d: &[f64]| dot(&conv2d_forward(&x, &with(&w, d), &b, geometry).unwrap(), &up);
    rep.merge(check_coords(&mut fw, w.data(), g.weights.data(), &all(w.len()), STEP, &mut never));
    let mut fb = |d: &[f64]| dot(&conv2d_forward(&x, &w, &with(&b, d), geometry).unwrap(), &up);
    rep.merge(check_coords(&mut fb, b.data(), g.bias.data(), &all(b.len()), STEP, &mut never));
    rep
}

pub fn fc(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let x = normal(&[4, 2, 2, 3], &mut r);
    let w = normal(&[12, 5], &mut r);
    let b = normal(&[5], &mut r);
    let y = fc_forward(&x, &w, &b).unwrap();
    let up = normal(y.shape(), &mut r);
    let g = fc_backward(&up, &x, &w).unwrap();

    let mut rep = GradReport::default();
    let mut fx = |d: &[f64]| dot(&fc_forward(&with(&x, d), &w, &b).unwrap(), &up);
    rep.merge(check_coords(&mut fx, x.data(), g.input.data(), &all(x.len()), STEP, &mut never));
    let mut fw = |d: &[f64]| dot(&fc_forward(&x, &with(&w, d), &b).unwrap(), &up);
    rep.merge(check_coords(&mut fw, w.data(), g.weights.data(), &all(w.len()), STEP, &mut never));
    let mut fb = |d: &[f64]| dot(&fc_forward(&x, &w, &with(&b, d)).unwrap(), &up);
    rep.merge(check_coords(&mut fb, b.data(), g.bias.data(), &all(b.len()), STEP, &mut never));
    rep
}

pub fn pool(seed: u64, kind: PoolKind) -> GradReport {
    let mut r = rng(seed);
    let x = normal(&[2, 4, 6, 3], &mut r);
    let (y, cache) = pool_forward(&x, kind).unwrap();
    let up = normal(y.shape(), &mut r);
    let g = pool_backward(&up, &cache).unwrap();
    let base = maxpool_winners(&x);
    let mut kink = |p: &[f64], m: &[f64]| kind == PoolKind::Max && (maxpool_winners(&with(&x, p)) != base || maxpool_winners(&with(&x, m)) != base);
    let mut f = |d: &[f64]| dot(&pool_forward(&with(&x, d), kind).unwrap().0, &up);
    check_coords(&mut f, x.data(), g.data(), &all(x.len()), STEP, &mut kink)
}

pub fn relu(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let x = normal(&[3, 4, 4, 2], &mut r);
    let up = normal(x.shape(), &mut r);
    let g = relu_backward(&up, &x).unwrap();
    let sign = |d: &[f64]| d.iter().map(|&v| v > 0.0).collect::<Vec<_>>();
    let base = sign(x.data());
    let mut kink = |p: &[f64], m: &[f64]| sign(p) != base || sign(m) != base;
    let mut f = |d: &[f64]| dot(&relu_forward(&with(&x, d)), &up);
    check_coords(&mut f, x.data(), g.data(), &all(x.len()), STEP, &mut kink)
}

pub fn softmax_cross_entropy(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let (n, k) = (4, 6);
    let logits = normal(&[n, k], &mut r);
    let targets: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
    let weights: Vec<f64> = (0..n).map(|_| r.gen_range(0.2..1.0)).collect();
    let probs = softmax(&logits);
    let mut analytic = Vec::new();
    for i in 0..n {
        analytic.extend(weighted_cross_entropy(probs.row(i), targets[i], weights[i]).unwrap().1);
    }
    let mut f = |d: &[f64]| batch_loss(&softmax(&with(&logits, d)), &targets, &weights);
    check_coords(&mut f, logits.data(), &analytic, &all(logits.len()), STEP, &mut never)
}

/// Full network on a random 4-image batch; `per_tensor` sampled coordinates
/// of every weight and bias tensor.
pub fn network(seed: u64, outputs: usize, per_tensor: usize) -> GradReport {
    let mut r = rng(seed);
    let mut net = LogoNet::<f64>::new(outputs, seed).unwrap();
    // non-zero biases so every bias gradient is exercised away from the origin
    for l in net.params_mut().layers.iter_mut() {
        for b in l.bias.data_mut() {
            *b = 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut r);
        }
    }
    let batch = Tensor::from_fn(&[4, 32, 32, 3], |_| r.gen_range(-1.0..1.0));
    let targets: Vec<usize> = (0..4).map(|_| r.gen_range(0..outputs)).collect();
    let weights: Vec<f64> = (0..4).map(|_| r.gen_range(0.5..1.0)).collect();

    let fwd = net.forward(&batch, Mode::Train).unwrap();
    let (ref_probs, base) = reference_forward(&net, &batch);
    assert_eq!(ref_probs, fwd.probs, "reference forward disagrees with the network");
    let mut grad_logits = Vec::new();
    for i in 0..4 {
        grad_logits.extend(weighted_cross_entropy(fwd.probs.row(i), targets[i], weights[i]).unwrap().1);
    }
    let grads = net.backward(&fwd, &Tensor::new(fwd.probs.shape().to_vec(), grad_logits).unwrap()).unwrap();

    let mut rep = GradReport::default();
    for layer in 0..net.params().layers.len() {
        for part in 0..2 {
            let (x0, analytic) = {
                let l = &net.params().layers[layer];
                let (t, g) = if part == 0 { (&l.weight, &grads[layer].0) } else { (&l.bias, &grads[layer].1) };
                (t.data().to_vec(), g.data().to_vec())
            };
            let idx = sample(&mut r, x0.len(), per_tensor.min(x0.len())).into_vec();
            let eval = |net: &mut LogoNet<f64>, d: &[f64]| {
                let l = &mut net.params_mut().layers[layer];
                let t = if part == 0 { &mut l.weight } else { &mut l.bias };
                t.data_mut().copy_from_slice(d);
                reference_forward(net, &batch)
            };
            let cell = std::cell::RefCell::new(net.clone());
            let mut f = |d: &[f64]| batch_loss(&eval(&mut cell.borrow_mut(), d).0, &targets, &weights);
            let mut kink = |p: &[f64], m: &[f64]| {
                let mut n = cell.borrow_mut();
                eval(&mut n, p).1 != base || eval(&mut n, m).1 != base
            };
            rep.merge(check_coords(&mut f, &x0, &analytic, &idx, STEP, &mut kink));
        }
    }
    rep
}
