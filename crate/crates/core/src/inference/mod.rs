//! Image-level decisions: propose, crop, classify, max-pool, threshold.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use image::RgbImage;
use rayon::prelude::*;
use thiserror::Error;

use crate::datamodel::{apply_norm, crop_resize, load_rgb, DataError};
use crate::logonet::Model;
use crate::nncore::{softmax_in_place, NnError, Scalar, Tensor};
use crate::proposals::Proposer;

/// Label printed for images without a recognised logo.
pub const NO_LOGO: &str = "NO-LOGO";

/// Proposals are classified in mini-batches of this size.
pub const PREDICT_BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("classification failed: {0}")]
    Network(#[from] NnError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageDecision {
    /// Recognised logo class, `None` for NO-LOGO.
    pub predicted: Option<usize>,
    /// Arg-max of the pooled vector, background included.
    pub winner: usize,
    /// Pooled score of `winner`; 0 without proposals.
    pub confidence: f64,
    /// Per-class maximum over proposals (empty without proposals).
    pub pooled: Vec<f64>,
    pub proposal_count: usize,
}

impl ImageDecision {
    /// Class name, or [`NO_LOGO`].
    pub fn label<'a>(&self, class_names: &'a [String]) -> &'a str {
        self.predicted.map_or(NO_LOGO, |c| class_names[c].as_str())
    }

    /// The decision the same pooled scores give under another threshold.
    pub fn with_threshold(&self, threshold: f64, background: usize) -> ImageDecision {
        decide(&self.pooled, background, threshold, self.proposal_count)
    }
}

/// Per-class maximum over proposal probability rows; monotone and
/// order-independent.
pub fn max_pool<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut pooled: Vec<f64> = Vec::new();
    for row in rows {
        if pooled.is_empty() {
            pooled = row.to_vec();
        } else {
            for (p, &v) in pooled.iter_mut().zip(row) {
                *p = p.max(v);
            }
        }
    }
    pooled
}

/// Arg-max with ties resolved toward `background`, then toward lower indices.
pub fn pooled_winner(pooled: &[f64], background: usize) -> usize {
    let mut best = 0;
    for (i, &v) in pooled.iter().enumerate().skip(1) {
        if v > pooled[best] || (v == pooled[best] && i == background) {
            best = i;
        }
    }
    if pooled.get(background) == Some(&pooled[best]) {
        background
    } else {
        best
    }
}

/// A logo class is reported only when it beats every other class including
/// background and its pooled score is strictly above `threshold`.
pub fn decide(pooled: &[f64], background: usize, threshold: f64, proposal_count: usize) -> ImageDecision {
    if proposal_count == 0 || pooled.is_empty() {
        return ImageDecision { predicted: None, winner: background, confidence: 0.0, pooled: pooled.to_vec(), proposal_count };
    }
    let winner = pooled_winner(pooled, background);
    let confidence = pooled[winner];
    let predicted = (winner != background && confidence > threshold).then_some(winner);
    ImageDecision { predicted, winner, confidence, pooled: pooled.to_vec(), proposal_count }
}

/// Wall-clock seconds per pipeline stage for one image.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub proposal: f64,
    pub preproc: f64,
    pub classif: f64,
    pub overall: f64,
}

/// Class probabilities for a list of crops, as f64 rows.
///
/// The softmax is taken in f64 from the network's logits: a confident f32
/// network rounds several classes to exactly 1.0 on different proposals,
/// which would turn max-pooling into a string of spurious ties.
pub fn classify_crops<T: Scalar>(model: &Model<T>, crops: &[Tensor<T>]) -> Result<Vec<Vec<f64>>, NnError> {
    let mut rows = Vec::with_capacity(crops.len());
    for chunk in crops.chunks(PREDICT_BATCH) {
        let refs: Vec<&Tensor<T>> = chunk.iter().collect();
        let logits = model.net.logits(&Tensor::stack(&refs)?)?;
        let k = logits.shape()[1];
        rows.extend(logits.data().chunks(k).map(|r| {
            let mut row: Vec<f64> = r.iter().map(|v| v.to_f64_lossy()).collect();
            softmax_in_place(&mut row);
            row
        }));
    }
    Ok(rows)
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Full test-time pipeline on a decoded image, with stage timings.
pub fn classify_image_timed<T: Scalar>(
    image: &RgbImage,
    model: &Model<T>,
    proposer: &dyn Proposer,
) -> Result<(ImageDecision, StageTimings), InferenceError> {
    let start = Instant::now();
    let proposals = proposer.propose(image);
    let t_prop = start.elapsed();

    let t = Instant::now();
    let mut crops = Vec::with_capacity(proposals.len());
    for b in proposals.iter() {
        let crop = crop_resize::<T>(image, b)?;
        crops.push(match &model.norm {
            Some(stats) => apply_norm(&crop, stats),
            None => crop,
        });
    }
    let t_pre = t.elapsed();

    let t = Instant::now();
    let rows = classify_crops(model, &crops)?;
    let pooled = max_pool(rows.iter().map(Vec::as_slice));
    let decision = decide(&pooled, model.background_index(), model.threshold, rows.len());
    let t_cls = t.elapsed();

    let timings = StageTimings { proposal: secs(t_prop), preproc: secs(t_pre), classif: secs(t_cls), overall: secs(start.elapsed()) };
    Ok((decision, timings))
}

pub fn classify_image<T: Scalar>(image: &RgbImage, model: &Model<T>, proposer: &dyn Proposer) -> Result<ImageDecision, InferenceError> {
    Ok(classify_image_timed(image, model, proposer)?.0)
}

/// Outcome for one image of a batch run.
#[derive(Debug)]
pub struct BatchEntry {
    pub path: PathBuf,
    pub result: Result<(ImageDecision, StageTimings), InferenceError>,
}

/// Classifies image files concurrently; output order follows `paths`. An
/// unreadable image yields an error entry without stopping the batch. Image
/// decoding is counted in `overall` only.
pub fn classify_batch<T: Scalar>(paths: &[PathBuf], model: &Model<T>, proposer: &dyn Proposer) -> Vec<BatchEntry> {
    paths
        .par_iter()
        .map(|path| BatchEntry { path: path.clone(), result: classify_path(path, model, proposer) })
        .collect()
}

fn classify_path<T: Scalar>(path: &Path, model: &Model<T>, proposer: &dyn Proposer) -> Result<(ImageDecision, StageTimings), InferenceError> {
    let start = Instant::now();
    let image = load_rgb(path)?;
    let (decision, mut timings) = classify_image_timed(&image, model, proposer)?;
    timings.overall = secs(start.elapsed());
    Ok((decision, timings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooled_example() {
        let rows = [vec![0.1, 0.7, 0.2], vec![0.5, 0.2, 0.3]];
        let pooled = max_pool(rows.iter().map(Vec::as_slice));
        assert_eq!(pooled, vec![0.5, 0.7, 0.3]);
        // background last (index 2)
        let d = decide(&pooled, 2, 0.0, 2);
        assert_eq!((d.predicted, d.confidence), (Some(1), 0.7));
    }

    #[test]
    fn background_winner_is_no_logo() {
        let d = decide(&[0.2, 0.1, 0.7], 2, 0.0, 1);
        assert_eq!(d.predicted, None);
        assert_eq!(d.winner, 2);
    }

    #[test]
    fn background_wins_ties() {
        assert_eq!(pooled_winner(&[0.4, 0.2, 0.4], 2), 2);
        assert_eq!(pooled_winner(&[0.4, 0.4, 0.2], 2), 0);
    }

    #[test]
    fn threshold_is_strict() {
        assert_eq!(decide(&[0.6, 0.4], 1, 0.6, 1).predicted, None);
        assert_eq!(decide(&[0.6, 0.4], 1, 0.59, 1).predicted, Some(0));
        assert_eq!(decide(&[1.0, 0.0], 1, 1.0, 1).predicted, None);
    }

    #[test]
    fn no_proposals() {
        let d = decide(&[], 3, 0.0, 0);
        assert_eq!((d.predicted, d.confidence, d.proposal_count), (None, 0.0, 0));
    }
}
