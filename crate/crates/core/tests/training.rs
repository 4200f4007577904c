mod common;

use logorec::logonet::LogoNet;
use logorec::nncore::Tensor;
use logorec::trainer::{evaluate_set, train_network, ClassBalance, LabeledSample, Origin, Preset, TrainingConfig, TrainingSet};
use rand::Rng;

fn patch(color: [f64; 3], r: &mut impl Rng) -> Tensor<f32> {
    Tensor::from_fn(&[32, 32, 3], |i| (color[i % 3] + r.gen_range(-0.05..0.05)) as f32)
}

fn sample(crop: Tensor<f32>, label: usize) -> LabeledSample<f32> {
    LabeledSample { crop, label, iou: 1.0, weight: 1.0, origin: Origin::Gt }
}

/// Ten reddish and ten bluish patches, three outputs (the last unused).
fn toy_set() -> TrainingSet<f32> {
    let mut r = common::rng(20);
    let mut samples = Vec::new();
    for i in 0..20 {
        let color = if i % 2 == 0 { [0.9, 0.2, 0.2] } else { [0.2, 0.2, 0.9] };
        samples.push(sample(patch(color, &mut r), i % 2));
    }
    TrainingSet { samples, norm: None, num_outputs: 3 }
}

fn toy_config(epochs: usize) -> TrainingConfig {
    let mut c = Preset::I.config();
    c.hyper.epochs = epochs;
    c.hyper.batch_size = 4;
    c.hyper.seed = 3;
    c
}

#[test]
fn separable_patches_are_learned() {
    let set = toy_set();
    let (net, history) = train_network(&set, &toy_config(20), |_| {}).unwrap();
    let (_, acc) = evaluate_set(&net, &set).unwrap();
    assert!(acc >= 0.95, "training accuracy {acc}, history {history:?}");
}

#[test]
fn same_seed_same_weights() {
    let set = toy_set();
    let mut cfg = toy_config(3);
    cfg.class_balance = ClassBalance::Batch;
    let (a, ha) = train_network(&set, &cfg, |_| {}).unwrap();
    let (b, hb) = train_network(&set, &cfg, |_| {}).unwrap();
    assert_eq!(ha.last().unwrap().loss.to_bits(), hb.last().unwrap().loss.to_bits());
    assert_eq!(a, b);
    cfg.hyper.seed = 4;
    let (c, _) = train_network(&set, &cfg, |_| {}).unwrap();
    assert_ne!(a, c);
}

#[test]
fn initial_weights_follow_fan_in_scaling() {
    let net = LogoNet::<f64>::new(33, 5).unwrap();
    let fan_in = [5 * 5 * 3, 5 * 5 * 32, 5 * 5 * 32, 4 * 4 * 64, 64];
    for (l, fan) in net.params().layers.iter().zip(fan_in) {
        let w = l.weight.data();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let std = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let want = (2.0 / fan as f64).sqrt();
        // sample statistics of n Gaussian draws: generous 5-sigma bands
        assert!(mean.abs() <= 5.0 * want / n.sqrt(), "fan-in {fan}: mean {mean}");
        assert!((std / want - 1.0).abs() <= 5.0 / (2.0 * n).sqrt(), "fan-in {fan}: std {std}, expected {want}");
        assert!(l.bias.data().iter().all(|&b| b == 0.0));
    }
    // with this scaling the initial loss is finite but well above ln C
    let mut r = common::rng(21);
    let samples: Vec<_> = (0..64).map(|i| sample(Tensor::from_fn(&[32, 32, 3], |_| r.gen_range(-1.7f32..1.7)), i % 9)).collect();
    let (loss, _) = evaluate_set(&LogoNet::<f32>::new(9, 5).unwrap(), &TrainingSet { samples, norm: None, num_outputs: 9 }).unwrap();
    assert!(loss.is_finite() && loss > 0.0);
}

#[test]
fn callback_sees_every_epoch_and_lr_drops() {
    let set = toy_set();
    let mut seen = Vec::new();
    let (_, history) = train_network(&set, &toy_config(6), |s| seen.push(*s)).unwrap();
    assert_eq!(seen, history);
    assert_eq!(history.iter().map(|s| s.epoch).collect::<Vec<_>>(), (0..6).collect::<Vec<_>>());
    assert!(history[..4].iter().all(|s| s.lr == 0.01) && history[4..].iter().all(|s| (s.lr - 0.001).abs() < 1e-15));
    assert!(history.last().unwrap().loss < history[0].loss);
}

#[test]
fn invalid_configurations_are_rejected() {
    let set = toy_set();
    let mut cfg = toy_config(1);
    cfg.hyper.batch_size = 0;
    assert!(train_network(&set, &cfg, |_| {}).is_err());
    let empty = TrainingSet::<f32> { samples: vec![], norm: None, num_outputs: 3 };
    assert!(train_network(&empty, &toy_config(1), |_| {}).is_err());
}
