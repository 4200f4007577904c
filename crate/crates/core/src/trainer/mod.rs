//! Training-set construction under the configurable training choices, the
//! SGD loop, and decision-threshold calibration.

mod config;
mod samples;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::datamodel::{balance_batch, balance_epoch, load_rgb, DataError, DatasetIndex, ImageRecord};
use crate::inference::{classify_image, ImageDecision, InferenceError};
use crate::logonet::{LogoNet, Model, ModelError, Mode};
use crate::nncore::{weighted_cross_entropy, NnError, Scalar, Tensor};
use crate::proposals::Proposer;

pub use config::{BoxSource, ClassBalance, Hyperparams, Preset, SampleOptions, Toggles, TrainingConfig};
pub use samples::{build_training_set, training_images, LabeledSample, Origin, TrainingSet};

/// Samples per gradient work unit. Units run concurrently and their
/// gradients are summed in a fixed order, so results do not depend on the
/// number of threads.
pub const GRAD_CHUNK: usize = 8;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("the training set is empty")]
    EmptyTrainingSet,
    #[error("the calibration set is empty")]
    EmptyCalibrationSet,
    #[error("a background class with ground-truth boxes only needs proposals to harvest background (enable bg_from_proposals)")]
    BackgroundNeedsProposals,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("network error: {0}")]
    Network(#[from] NnError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    /// Mean weighted cross-entropy over the samples fed this epoch.
    pub loss: f64,
    /// Fraction of fed samples whose arg-max matched the label.
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub threshold: f64,
    /// Image-level accuracy on the calibration images at `threshold`.
    pub calibration_accuracy: f64,
    pub counts: BTreeMap<(Origin, usize), usize>,
}

impl TrainReport {
    /// Line-delimited text form.
    pub fn to_text(&self, class_names: &[String]) -> String {
        let name = |c: usize| class_names.get(c).map_or("background", String::as_str);
        let mut s = String::new();
        for e in &self.epochs {
            let _ = writeln!(s, "epoch {} lr {} loss {:.6} accuracy {:.4}", e.epoch + 1, e.lr, e.loss, e.accuracy);
        }
        for (&(origin, class), n) in &self.counts {
            let _ = writeln!(s, "samples {} {} {n}", origin.name(), name(class));
        }
        let _ = writeln!(s, "threshold {}", self.threshold);
        let _ = writeln!(s, "calibration_accuracy {:.4}", self.calibration_accuracy);
        s
    }
}

/// Mini-batches of sample indices for one epoch.
fn epoch_batches<T>(set: &TrainingSet<T>, config: &TrainingConfig, epoch: usize) -> Vec<Vec<usize>> {
    let seed = config.hyper.seed.wrapping_mul(1_000_003).wrapping_add(epoch as u64);
    let bs = config.hyper.batch_size;
    let labels: Vec<usize> = set.samples.iter().map(|s| s.label).collect();
    match config.class_balance {
        ClassBalance::None => {
            let mut order: Vec<usize> = (0..labels.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            order.chunks(bs).map(<[usize]>::to_vec).collect()
        }
        ClassBalance::Epoch => {
            let mut groups = vec![Vec::new(); set.num_outputs];
            for (i, &l) in labels.iter().enumerate() {
                groups[l].push(i);
            }
            balance_epoch(&groups, seed).chunks(bs).map(<[usize]>::to_vec).collect()
        }
        ClassBalance::Batch => balance_batch(&labels, bs, seed).collect(),
    }
}

struct ChunkResult<T> {
    grads: Vec<(Tensor<T>, Tensor<T>)>,
    loss: f64,
    correct: usize,
}

fn chunk_gradients<T: Scalar>(net: &LogoNet<T>, set: &TrainingSet<T>, idx: &[usize], batch_len: usize) -> Result<ChunkResult<T>, NnError> {
    let crops: Vec<&Tensor<T>> = idx.iter().map(|&i| &set.samples[i].crop).collect();
    let fwd = net.forward(&Tensor::stack(&crops)?, Mode::Train)?;
    let k = net.num_outputs();
    let scale = T::from_f64_lossy(1.0 / batch_len as f64);
    let mut grad = Vec::with_capacity(idx.len() * k);
    let (mut loss, mut correct) = (0.0, 0);
    for (row, &i) in fwd.probs.data().chunks(k).zip(idx) {
        let s = &set.samples[i];
        let (l, g) = weighted_cross_entropy(row, s.label, T::from_f64_lossy(s.weight))?;
        loss += l.to_f64_lossy();
        grad.extend(g.into_iter().map(|v| v * scale));
        let argmax = (0..k).fold(0, |b, j| if row[j] > row[b] { j } else { b });
        correct += usize::from(argmax == s.label);
    }
    let grads = net.backward(&fwd, &Tensor::new(vec![idx.len(), k], grad)?)?;
    Ok(ChunkResult { grads, loss, correct })
}

/// Mean loss and accuracy of `net` over the whole set, without updates.
pub fn evaluate_set<T: Scalar>(net: &LogoNet<T>, set: &TrainingSet<T>) -> Result<(f64, f64), NnError> {
    let idx: Vec<usize> = (0..set.samples.len()).collect();
    let parts: Vec<(f64, usize)> = idx
        .par_chunks(64)
        .map(|c| {
            let crops: Vec<&Tensor<T>> = c.iter().map(|&i| &set.samples[i].crop).collect();
            let probs = net.predict(&Tensor::stack(&crops)?)?;
            let k = net.num_outputs();
            let mut acc = (0.0, 0);
            for (row, &i) in probs.data().chunks(k).zip(c) {
                let s = &set.samples[i];
                acc.0 += weighted_cross_entropy(row, s.label, T::from_f64_lossy(s.weight))?.0.to_f64_lossy();
                let argmax = (0..k).fold(0, |b, j| if row[j] > row[b] { j } else { b });
                acc.1 += usize::from(argmax == s.label);
            }
            Ok(acc)
        })
        .collect::<Result<_, NnError>>()?;
    let n = set.samples.len().max(1) as f64;
    Ok((parts.iter().map(|p| p.0).sum::<f64>() / n, parts.iter().map(|p| p.1).sum::<usize>() as f64 / n))
}

/// Mini-batch momentum SGD on a built set. `on_epoch` sees each epoch's stats.
pub fn train_network<T: Scalar>(
    set: &TrainingSet<T>,
    config: &TrainingConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(LogoNet<T>, Vec<EpochStats>), TrainError> {
    if set.samples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let h = &config.hyper;
    if h.batch_size == 0 {
        return Err(TrainError::InvalidConfig("batch_size must be positive".into()));
    }
    let mut net = LogoNet::<T>::new(set.num_outputs, h.seed)?;
    let mut history = Vec::with_capacity(h.epochs);
    for epoch in 0..h.epochs {
        let lr = h.lr_at(epoch);
        let (mut loss, mut correct, mut fed) = (0.0, 0usize, 0usize);
        for batch in epoch_batches(set, config, epoch) {
            let parts: Vec<ChunkResult<T>> = batch
                .par_chunks(GRAD_CHUNK)
                .map(|c| chunk_gradients(&net, set, c, batch.len()))
                .collect::<Result<_, _>>()?;
            let params = net.params_mut();
            params.zero_grad();
            for p in &parts {
                params.accumulate(&p.grads)?;
                loss += p.loss;
                correct += p.correct;
            }
            crate::nncore::sgd_step(params, T::from_f64_lossy(lr), T::from_f64_lossy(h.momentum));
            fed += batch.len();
        }
        let stats = EpochStats { epoch, lr, loss: loss / fed.max(1) as f64, accuracy: correct as f64 / fed.max(1) as f64 };
        log::info!("epoch {} lr {} loss {:.5} acc {:.4}", epoch + 1, lr, stats.loss, stats.accuracy);
        on_epoch(&stats);
        history.push(stats);
    }
    // optimiser state is not part of the trained model
    net.params_mut().reset_state();
    Ok((net, history))
}

/// Threshold and the accuracy it achieves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Calibration {
    pub threshold: f64,
    pub accuracy: f64,
}

/// Image-level accuracy of pooled decisions re-thresholded at `threshold`.
pub fn accuracy_at(decisions: &[(ImageDecision, Option<usize>)], background: usize, threshold: f64) -> f64 {
    let correct = decisions.iter().filter(|(d, label)| d.with_threshold(threshold, background).predicted == *label).count();
    correct as f64 / decisions.len() as f64
}

/// Smallest threshold among `{0}` and the observed logo-winner confidences
/// that maximises image-level accuracy.
pub fn best_threshold(decisions: &[(ImageDecision, Option<usize>)], background: usize) -> Result<Calibration, TrainError> {
    if decisions.is_empty() {
        return Err(TrainError::EmptyCalibrationSet);
    }
    let mut candidates: Vec<f64> = std::iter::once(0.0)
        .chain(decisions.iter().filter(|(d, _)| d.proposal_count > 0 && d.winner != background).map(|(d, _)| d.confidence))
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = Calibration { threshold: candidates[0], accuracy: accuracy_at(decisions, background, candidates[0]) };
    for &t in &candidates[1..] {
        let a = accuracy_at(decisions, background, t);
        if a > best.accuracy {
            best = Calibration { threshold: t, accuracy: a };
        }
    }
    Ok(best)
}

/// Runs the decision pipeline on labelled images and picks the threshold
/// maximising image-level accuracy (see [`best_threshold`]).
pub fn calibrate_threshold<T: Scalar>(
    model: &Model<T>,
    images: &[&ImageRecord],
    proposer: &dyn Proposer,
) -> Result<Calibration, TrainError> {
    if images.is_empty() {
        return Err(TrainError::EmptyCalibrationSet);
    }
    let decisions: Vec<(ImageDecision, Option<usize>)> = images
        .par_iter()
        .map(|r| -> Result<_, TrainError> { Ok((classify_image(&load_rgb(&r.path)?, model, proposer)?, r.label)) })
        .collect::<Result<_, _>>()?;
    best_threshold(&decisions, model.background_index())
}

/// Builds the training set, trains, and calibrates the threshold on the
/// training images (train and, if enabled, val).
pub fn train<T: Scalar>(
    config: &TrainingConfig,
    dataset: &DatasetIndex,
    proposer: &dyn Proposer,
) -> Result<(Model<T>, TrainReport), TrainError> {
    let set = build_training_set::<T>(config, dataset, proposer)?;
    log::info!("training set: {} samples", set.samples.len());
    let (net, epochs) = train_network(&set, config, |_| {})?;
    let model = Model::new(net, set.norm, 0.0, dataset.classes.clone())?.storage_rounded();
    let calib = calibrate_threshold(&model, &training_images(config, dataset), proposer)?;
    let model = Model { threshold: calib.threshold, ..model };
    let report = TrainReport { epochs, threshold: calib.threshold, calibration_accuracy: calib.accuracy, counts: set.counts() };
    Ok((model, report))
}
