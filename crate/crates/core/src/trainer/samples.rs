use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{BoxSource, TrainError, TrainingConfig};
use crate::datamodel::{
    apply_norm, augment_shifts, compute_norm_stats, crop_resize, iou, label_proposals, load_rgb, BoundingBox, DatasetIndex,
    ImageRecord, NormStats, ProposalLabel, Split,
};
use crate::nncore::{Scalar, Tensor};
use crate::proposals::Proposer;

/// Where a training example came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Gt,
    Op,
    OpBackground,
    Augmented,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::Gt => "GT",
            Origin::Op => "OP",
            Origin::OpBackground => "OP-background",
            Origin::Augmented => "augmented",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample<T> {
    /// `32 x 32 x 3`, normalised when the set was built with contrast norm.
    pub crop: Tensor<T>,
    /// Class index; the background class is the last index.
    pub label: usize,
    pub iou: f64,
    pub weight: f64,
    pub origin: Origin,
}

#[derive(Clone, Debug)]
pub struct TrainingSet<T> {
    pub samples: Vec<LabeledSample<T>>,
    pub norm: Option<NormStats>,
    /// Logo classes plus background.
    pub num_outputs: usize,
}

impl<T> TrainingSet<T> {
    /// Sample counts keyed by origin and class.
    pub fn counts(&self) -> BTreeMap<(Origin, usize), usize> {
        let mut m = BTreeMap::new();
        for s in &self.samples {
            *m.entry((s.origin, s.label)).or_insert(0) += 1;
        }
        m
    }
}

/// Images whose annotations supply training examples.
pub fn training_images<'a>(config: &TrainingConfig, dataset: &'a DatasetIndex) -> Vec<&'a ImageRecord> {
    let splits: &[Split] = if config.samples.include_val { &[Split::Train, Split::Val] } else { &[Split::Train] };
    dataset.images(splits)
}

fn best_iou_for_class(b: &BoundingBox, record: &ImageRecord, class: usize) -> f64 {
    record.annotations.iter().filter(|a| a.class == class).map(|a| iou(b, &a.bbox)).fold(0.0, f64::max)
}

fn image_samples<T: Scalar>(
    config: &TrainingConfig,
    record: &ImageRecord,
    background: usize,
    proposer: &dyn Proposer,
    stream: u64,
) -> Result<Vec<LabeledSample<T>>, TrainError> {
    let image = load_rgb(&record.path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.hyper.seed);
    rng.set_stream(stream);
    let mut out = Vec::new();
    let mut positives: Vec<(BoundingBox, usize)> = Vec::new();
    for a in &record.annotations {
        out.push(LabeledSample { crop: crop_resize(&image, &a.bbox)?, label: a.class, iou: 1.0, weight: 1.0, origin: Origin::Gt });
        positives.push((a.bbox, a.class));
    }

    let use_op = config.bbs == BoxSource::GtOp;
    if use_op || config.bg_class {
        let proposals: Vec<BoundingBox> = proposer.propose(&image).iter().copied().collect();
        let annotations: Vec<(BoundingBox, usize)> = record.annotations.iter().map(|a| (a.bbox, a.class)).collect();
        let mut background_boxes = Vec::new();
        for (b, label) in label_proposals(&proposals, &annotations) {
            match label {
                ProposalLabel::Positive { class, iou } if use_op => {
                    let weight = if config.sample_weight { iou } else { 1.0 };
                    out.push(LabeledSample { crop: crop_resize(&image, &b)?, label: class, iou, weight, origin: Origin::Op });
                    positives.push((b, class));
                }
                ProposalLabel::Background if config.bg_class => background_boxes.push(b),
                _ => {}
            }
        }
        // fractional caps keep floor(cap) or floor(cap) + 1 boxes at random
        let cap_f = config.samples.max_background_per_image;
        let cap = if cap_f.is_finite() {
            cap_f.floor() as usize + usize::from(rng.gen_bool(cap_f - cap_f.floor()))
        } else {
            usize::MAX
        };
        if background_boxes.len() > cap {
            let mut keep = sample(&mut rng, background_boxes.len(), cap).into_vec();
            keep.sort_unstable();
            background_boxes = keep.into_iter().map(|i| background_boxes[i]).collect();
        }
        for b in background_boxes {
            out.push(LabeledSample { crop: crop_resize(&image, &b)?, label: background, iou: 0.0, weight: 1.0, origin: Origin::OpBackground });
        }
    }

    if config.data_augm && config.samples.augment_copies > 0 {
        let size = (image.width(), image.height());
        for (b, class) in positives {
            let scale = (b.w + b.h) as f64 / 2.0 / 32.0;
            let max_shift = (config.samples.augment_shift * scale).round() as u32;
            for s in augment_shifts(&b, size, config.samples.augment_copies, max_shift, rng.gen()) {
                let v = best_iou_for_class(&s, record, class);
                let weight = if config.sample_weight { v } else { 1.0 };
                out.push(LabeledSample { crop: crop_resize(&image, &s)?, label: class, iou: v, weight, origin: Origin::Augmented });
            }
        }
    }
    Ok(out)
}

/// Harvests labelled crops from the training images under `config`:
/// ground-truth crops always; proposal positives for GT+OP; proposal
/// background (capped per image) with a background class; shifted copies
/// of every positive with augmentation. With contrast normalisation the
/// statistics are computed over the whole built set and applied to it.
///
/// Images are processed concurrently, but each image draws from its own
/// random stream and results are concatenated in image order, so the set
/// does not depend on the thread count.
pub fn build_training_set<T: Scalar>(
    config: &TrainingConfig,
    dataset: &DatasetIndex,
    proposer: &dyn Proposer,
) -> Result<TrainingSet<T>, TrainError> {
    if config.samples.max_background_per_image.is_nan() || config.samples.max_background_per_image < 0.0 {
        return Err(TrainError::InvalidConfig("max_background_per_image must be non-negative".into()));
    }
    if config.bg_class && config.bbs == BoxSource::Gt && !config.samples.bg_from_proposals {
        return Err(TrainError::BackgroundNeedsProposals);
    }
    let background = dataset.background_index();
    let images = training_images(config, dataset);
    let per_image: Vec<Vec<LabeledSample<T>>> = images
        .par_iter()
        .enumerate()
        .map(|(i, r)| image_samples(config, r, background, proposer, i as u64))
        .collect::<Result<_, _>>()?;
    let mut samples: Vec<LabeledSample<T>> = per_image.into_iter().flatten().collect();
    if samples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let norm = config.contrast_norm.then(|| compute_norm_stats(samples.iter().map(|s| &s.crop)));
    if let Some(stats) = &norm {
        for s in &mut samples {
            s.crop = apply_norm(&s.crop, stats);
        }
    }
    Ok(TrainingSet { samples, norm, num_outputs: background + 1 })
}
