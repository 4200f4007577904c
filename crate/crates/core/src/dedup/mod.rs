//! Duplicate screening: exact duplicates by block SSIM, near-duplicate
//! candidates by nearest neighbours in the network's 64-d feature space.

use image::imageops::{self, FilterType};
use image::RgbImage;
use rayon::prelude::*;

use crate::datamodel::{apply_norm, crop_resize, BoundingBox, DataError};
use crate::logonet::Model;
use crate::nncore::{NnError, Scalar, Tensor};

/// Neighbours reported per query.
pub const NEIGHBORS: usize = 5;

/// Pairs scoring strictly above this are exact duplicates.
pub const DUPLICATE_SSIM: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct SsimConfig {
    /// Images are compared as `size x size` grayscale.
    pub size: u32,
    /// Side of the non-overlapping square windows.
    pub block: usize,
    pub c1: f64,
    pub c2: f64,
    pub luma: [f64; 3],
}

impl Default for SsimConfig {
    fn default() -> Self {
        // dynamic range L = 1
        SsimConfig { size: 128, block: 8, c1: 0.01f64.powi(2), c2: 0.03f64.powi(2), luma: [0.299, 0.587, 0.114] }
    }
}

/// Grayscale plane in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..width * height).map(|i| f(i % width, i / width)).collect();
        GrayImage { width, height, data }
    }
}

/// Resizes to the comparison size and converts to luma.
pub fn to_gray(image: &RgbImage, config: &SsimConfig) -> GrayImage {
    let resized = if image.dimensions() == (config.size, config.size) {
        image.clone()
    } else {
        imageops::resize(image, config.size, config.size, FilterType::Triangle)
    };
    let [wr, wg, wb] = config.luma;
    let data = resized.pixels().map(|p| (wr * p[0] as f64 + wg * p[1] as f64 + wb * p[2] as f64) / 255.0).collect();
    GrayImage { width: config.size as usize, height: config.size as usize, data }
}

/// Mean SSIM over non-overlapping `block x block` windows (a trailing partial
/// row or column of windows is ignored). Symmetric, and exactly 1 for
/// identical inputs.
pub fn ssim_gray(a: &GrayImage, b: &GrayImage, config: &SsimConfig) -> f64 {
    assert_eq!((a.width, a.height), (b.width, b.height), "ssim inputs must share extents");
    let k = config.block;
    let (bx, by) = (a.width / k, a.height / k);
    assert!(bx > 0 && by > 0, "images smaller than one ssim window");
    let n = (k * k) as f64;
    let mut total = 0.0;
    for j in 0..by {
        for i in 0..bx {
            let at = |img: &GrayImage, u: usize, v: usize| img.data[(j * k + v) * img.width + i * k + u];
            let (mut ma, mut mb) = (0.0, 0.0);
            for v in 0..k {
                for u in 0..k {
                    ma += at(a, u, v);
                    mb += at(b, u, v);
                }
            }
            ma /= n;
            mb /= n;
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for v in 0..k {
                for u in 0..k {
                    let (da, db) = (at(a, u, v) - ma, at(b, u, v) - mb);
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            }
            let (va, vb, cov) = (va / n, vb / n, cov / n);
            total += (2.0 * ma * mb + config.c1) * (2.0 * cov + config.c2) / ((ma * ma + mb * mb + config.c1) * (va + vb + config.c2));
        }
    }
    total / (bx * by) as f64
}

pub fn ssim(a: &RgbImage, b: &RgbImage) -> f64 {
    let config = SsimConfig::default();
    ssim_gray(&to_gray(a, &config), &to_gray(b, &config), &config)
}

/// A pair `(i, j, ssim)` scoring above the threshold.
pub type DuplicatePair = (usize, usize, f64);

/// Pairs with SSIM strictly above `threshold`. With `b = None` the set is
/// compared with itself: unordered pairs `i < j`, no self-pairs. Otherwise
/// every `(i in a, j in b)` pair is tested.
pub fn find_exact_duplicates(a: &[GrayImage], b: Option<&[GrayImage]>, threshold: f64, config: &SsimConfig) -> Vec<DuplicatePair> {
    let (other, within) = match b {
        Some(b) => (b, false),
        None => (a, true),
    };
    (0..a.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let start = if within { i + 1 } else { 0 };
            (start..other.len()).filter_map(move |j| {
                let s = ssim_gray(&a[i], &other[j], config);
                (s > threshold).then_some((i, j, s))
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeighborList {
    pub query: usize,
    /// `(index into the searched set, distance)`, nearest first; ties by index.
    pub neighbors: Vec<(usize, f64)>,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exact `k` nearest neighbours of every query by full scan. With
/// `exclude_self` the sets are the same and item `i` never matches itself.
pub fn nearest_neighbors(queries: &[Vec<f64>], items: &[Vec<f64>], k: usize, exclude_self: bool) -> Vec<NeighborList> {
    queries
        .par_iter()
        .enumerate()
        .map(|(q, f)| {
            let mut d: Vec<(usize, f64)> =
                items.iter().enumerate().filter(|&(j, _)| !(exclude_self && j == q)).map(|(j, g)| (j, euclidean(f, g))).collect();
            d.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
            d.truncate(k);
            NeighborList { query: q, neighbors: d }
        })
        .collect()
}

/// Whole-image crop at network resolution, normalised like the model's inputs.
pub fn image_crop<T: Scalar>(image: &RgbImage, model: &Model<T>) -> Result<Tensor<T>, DataError> {
    let full = BoundingBox::new(0, 0, image.width(), image.height());
    let crop = crop_resize::<T>(image, &full)?;
    Ok(match &model.norm {
        Some(stats) => apply_norm(&crop, stats),
        None => crop,
    })
}

/// Truncated-network embeddings of `32 x 32 x 3` crops.
pub fn features<T: Scalar>(model: &Model<T>, crops: &[Tensor<T>]) -> Result<Vec<Vec<f64>>, NnError> {
    let mut out = Vec::with_capacity(crops.len());
    for chunk in crops.chunks(64) {
        let refs: Vec<&Tensor<T>> = chunk.iter().collect();
        let f = model.net.features_batch(&Tensor::stack(&refs)?)?;
        out.extend(f.data().chunks(f.shape()[1]).map(|r| r.iter().map(|v| v.to_f64_lossy()).collect::<Vec<f64>>()));
    }
    Ok(out)
}

/// Five nearest `b` crops for each `a` crop in feature space. With `b = None`
/// `a` is searched against itself, excluding self-matches.
pub fn find_near_duplicates<T: Scalar>(model: &Model<T>, a: &[Tensor<T>], b: Option<&[Tensor<T>]>) -> Result<Vec<NeighborList>, NnError> {
    let fa = features(model, a)?;
    Ok(match b {
        Some(b) => nearest_neighbors(&fa, &features(model, b)?, NEIGHBORS, false),
        None => nearest_neighbors(&fa, &fa, NEIGHBORS, true),
    })
}
