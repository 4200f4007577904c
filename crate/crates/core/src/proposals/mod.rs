//! Candidate regions from graph segmentation and hierarchical grouping.

mod group;
mod segment;

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::Mutex;

use image::RgbImage;

use crate::datamodel::BoundingBox;

pub use group::{build_hierarchy, group_regions, similarity, Hierarchy, Region, COLOR_BINS, TEXTURE_BINS};
pub use segment::{segment_graph, segment_graph_smoothed, SegmentationMap};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredBox {
    pub bbox: BoundingBox,
    /// Grouping-order score in `(0, 1]`; coarser regions score higher.
    pub score: f64,
}

/// Distinct boxes ordered by descending score, ties by box coordinates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProposalSet {
    boxes: Vec<ScoredBox>,
}

impl ProposalSet {
    /// Deduplicates, keeping the highest score seen for each box.
    pub fn from_scored(boxes: impl IntoIterator<Item = ScoredBox>) -> Self {
        let mut best: HashMap<BoundingBox, f64> = HashMap::new();
        for b in boxes {
            let e = best.entry(b.bbox).or_insert(b.score);
            if b.score > *e {
                *e = b.score;
            }
        }
        let mut boxes: Vec<ScoredBox> = best.into_iter().map(|(bbox, score)| ScoredBox { bbox, score }).collect();
        boxes.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.bbox.cmp(&b.bbox)));
        ProposalSet { boxes }
    }

    pub fn boxes(&self) -> &[ScoredBox] {
        &self.boxes
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BoundingBox> {
        self.boxes.iter().map(|b| &b.bbox)
    }

    pub fn contains(&self, bbox: &BoundingBox) -> bool {
        self.boxes.iter().any(|b| b.bbox == *bbox)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProposalConfig {
    /// One segmentation + grouping pass per value.
    pub k_values: Vec<f64>,
    /// Minimum segment size in pixels; also the minimum box area kept.
    pub min_size: usize,
    pub max_proposals: usize,
    /// Gaussian pre-smoothing before segmentation; `0` disables it.
    pub sigma: f64,
    /// Boxes with `w / h` outside `[1 / max_aspect, max_aspect]` are dropped.
    pub max_aspect: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig { k_values: vec![100.0, 200.0], min_size: 20, max_proposals: 2000, sigma: 0.0, max_aspect: 8.0 }
    }
}

impl ProposalConfig {
    fn keeps(&self, b: &BoundingBox) -> bool {
        let a = b.aspect();
        b.area() >= self.min_size as u64 && a >= 1.0 / self.max_aspect && a <= self.max_aspect
    }
}

/// Union of the grouping hierarchies over every `k`, filtered, deduplicated
/// and truncated to the `max_proposals` highest-scoring boxes.
pub fn propose(image: &RgbImage, config: &ProposalConfig) -> ProposalSet {
    let mut all = Vec::new();
    for &k in &config.k_values {
        let seg = segment_graph_smoothed(image, k, config.min_size, config.sigma);
        all.extend(build_hierarchy(&seg, image).scored_boxes().into_iter().filter(|b| config.keeps(&b.bbox)));
    }
    let mut set = ProposalSet::from_scored(all);
    set.boxes.truncate(config.max_proposals);
    set
}

/// Source of candidate regions for an image.
pub trait Proposer: Sync {
    fn propose(&self, image: &RgbImage) -> ProposalSet;
}

impl Proposer for ProposalConfig {
    fn propose(&self, image: &RgbImage) -> ProposalSet {
        propose(image, self)
    }
}

/// Memoizes another proposer by image content, so repeated passes over the
/// same images (several training runs, evaluation) segment each image once.
pub struct CachedProposer<P> {
    inner: P,
    cache: Mutex<HashMap<(u32, u32, u64), ProposalSet>>,
}

impl<P: Proposer> CachedProposer<P> {
    pub fn new(inner: P) -> Self {
        CachedProposer { inner, cache: Mutex::new(HashMap::new()) }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: Proposer> Proposer for CachedProposer<P> {
    fn propose(&self, image: &RgbImage) -> ProposalSet {
        let mut h = DefaultHasher::new();
        image.as_raw().hash(&mut h);
        let key = (image.width(), image.height(), h.finish());
        if let Some(hit) = self.cache.lock().expect("proposal cache poisoned").get(&key) {
            return hit.clone();
        }
        let set = self.inner.propose(image);
        self.cache.lock().expect("proposal cache poisoned").insert(key, set.clone());
        set
    }
}
