use std::collections::{BTreeMap, BTreeSet};

use image::RgbImage;

use super::segment::SegmentationMap;
use super::{ProposalSet, ScoredBox};
use crate::datamodel::BoundingBox;

pub const COLOR_BINS: usize = 25;
pub const TEXTURE_BINS: usize = 10;

/// A connected group of pixels with the features used for grouping.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub bbox: BoundingBox,
    pub size: usize,
    /// `COLOR_BINS` bins per channel, channel-major, summing to 1.
    pub color_hist: Vec<f64>,
    /// `TEXTURE_BINS` gradient-orientation bins per channel, summing to 1.
    pub texture_hist: Vec<f64>,
}

impl Region {
    /// Union of two regions; histograms are size-weighted averages.
    pub fn merge(&self, other: &Region) -> Region {
        let (sa, sb) = (self.size as f64, other.size as f64);
        let total = sa + sb;
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x * sa + y * sb) / total).collect();
        Region {
            bbox: self.bbox.enclosing(&other.bbox),
            size: self.size + other.size,
            color_hist: mix(&self.color_hist, &other.color_hist),
            texture_hist: mix(&self.texture_hist, &other.texture_hist),
        }
    }
}

fn intersection(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.min(*y)).sum()
}

/// Equally weighted colour + texture + size + fill similarity, in `[0, 4]`.
pub fn similarity(a: &Region, b: &Region, image_area: f64) -> f64 {
    let joint = (a.size + b.size) as f64;
    let size = 1.0 - joint / image_area;
    let fill = 1.0 - (a.bbox.enclosing(&b.bbox).area() as f64 - joint) / image_area;
    intersection(&a.color_hist, &b.color_hist) + intersection(&a.texture_hist, &b.texture_hist) + size + fill
}

/// The full binary merge tree: leaves first, then one region per merge.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub regions: Vec<Region>,
    /// `merges[i]` produced `regions[leaves + i]`.
    pub merges: Vec<(usize, usize)>,
    pub leaves: usize,
}

impl Hierarchy {
    /// Every region box in creation order, scored by creation order so that
    /// later (coarser) merges rank higher. Not deduplicated.
    pub fn scored_boxes(&self) -> Vec<ScoredBox> {
        let n = self.regions.len() as f64;
        self.regions.iter().enumerate().map(|(i, r)| ScoredBox { bbox: r.bbox, score: (i + 1) as f64 / n }).collect()
    }
}

fn orientation_bin(gx: f64, gy: f64) -> usize {
    let t = (gy.atan2(gx) + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
    ((t * TEXTURE_BINS as f64) as usize).min(TEXTURE_BINS - 1)
}

fn leaf_regions(seg: &SegmentationMap, image: &RgbImage) -> Vec<Region> {
    let (w, h) = (seg.width as usize, seg.height as usize);
    let n = seg.count;
    let mut bounds = vec![(u32::MAX, u32::MAX, 0u32, 0u32); n];
    let mut sizes = vec![0usize; n];
    let mut color = vec![vec![0.0; 3 * COLOR_BINS]; n];
    let mut texture = vec![vec![0.0; 3 * TEXTURE_BINS]; n];
    let px = |x: usize, y: usize, c: usize| image.get_pixel(x as u32, y as u32)[c] as f64;
    for y in 0..h {
        for x in 0..w {
            let l = seg.labels[y * w + x] as usize;
            let b = &mut bounds[l];
            *b = (b.0.min(x as u32), b.1.min(y as u32), b.2.max(x as u32), b.3.max(y as u32));
            sizes[l] += 1;
            for c in 0..3 {
                let v = px(x, y, c);
                color[l][c * COLOR_BINS + (v as usize * COLOR_BINS / 256)] += 1.0;
                let gx = px((x + 1).min(w - 1), y, c) - px(x.saturating_sub(1), y, c);
                let gy = px(x, (y + 1).min(h - 1), c) - px(x, y.saturating_sub(1), c);
                texture[l][c * TEXTURE_BINS + orientation_bin(gx, gy)] += 1.0;
            }
        }
    }
    (0..n)
        .map(|l| {
            let votes = 3.0 * sizes[l] as f64;
            let (x0, y0, x1, y1) = bounds[l];
            Region {
                bbox: BoundingBox::new(x0 as i32, y0 as i32, x1 - x0 + 1, y1 - y0 + 1),
                size: sizes[l],
                color_hist: color[l].iter().map(|v| v / votes).collect(),
                texture_hist: texture[l].iter().map(|v| v / votes).collect(),
            }
        })
        .collect()
}

fn adjacency(seg: &SegmentationMap) -> Vec<BTreeSet<usize>> {
    let (w, h) = (seg.width as usize, seg.height as usize);
    let mut adj = vec![BTreeSet::new(); seg.count];
    let mut link = |a: u32, b: u32| {
        if a != b {
            adj[a as usize].insert(b as usize);
            adj[b as usize].insert(a as usize);
        }
    };
    for y in 0..h {
        for x in 0..w {
            let l = seg.labels[y * w + x];
            if x + 1 < w {
                link(l, seg.labels[y * w + x + 1]);
            }
            if y + 1 < h {
                link(l, seg.labels[(y + 1) * w + x]);
                if x + 1 < w {
                    link(l, seg.labels[(y + 1) * w + x + 1]);
                }
                if x > 0 {
                    link(l, seg.labels[(y + 1) * w + x - 1]);
                }
            }
        }
    }
    adj
}

/// Greedy hierarchical grouping: repeatedly merge the most similar adjacent
/// pair (ties to the smallest id pair) until no adjacent pairs remain.
pub fn build_hierarchy(seg: &SegmentationMap, image: &RgbImage) -> Hierarchy {
    let mut regions = leaf_regions(seg, image);
    let leaves = regions.len();
    let mut adj = adjacency(seg);
    let area = (seg.width as f64) * (seg.height as f64);
    let mut sims: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (a, nbrs) in adj.iter().enumerate() {
        for &b in nbrs.range(a + 1..) {
            sims.insert((a, b), similarity(&regions[a], &regions[b], area));
        }
    }
    let mut merges = Vec::new();
    loop {
        let mut best: Option<((usize, usize), f64)> = None;
        for (&pair, &s) in &sims {
            if best.map_or(true, |(_, bs)| s > bs) {
                best = Some((pair, s));
            }
        }
        let Some(((a, b), _)) = best else { break };
        let t = regions.len();
        regions.push(regions[a].merge(&regions[b]));
        merges.push((a, b));
        let mut nbrs: BTreeSet<usize> = adj[a].union(&adj[b]).copied().collect();
        nbrs.remove(&a);
        nbrs.remove(&b);
        for old in [a, b] {
            for &o in &std::mem::take(&mut adj[old]) {
                sims.remove(&(old.min(o), old.max(o)));
                adj[o].remove(&old);
            }
        }
        for &o in &nbrs {
            adj[o].insert(t);
            sims.insert((o, t), similarity(&regions[o], &regions[t], area));
        }
        adj.push(nbrs);
    }
    Hierarchy { regions, merges, leaves }
}

/// Deduplicated boxes of every region in the merge hierarchy.
pub fn group_regions(seg: &SegmentationMap, image: &RgbImage) -> ProposalSet {
    ProposalSet::from_scored(build_hierarchy(seg, image).scored_boxes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proposals::segment_graph;
    use image::Rgb;

    fn halves() -> RgbImage {
        RgbImage::from_fn(20, 10, |x, _| if x < 8 { Rgb([200, 10, 10]) } else { Rgb([10, 10, 200]) })
    }

    #[test]
    fn two_components_give_three_boxes() {
        let img = halves();
        let seg = segment_graph(&img, 1.0, 5);
        assert_eq!(seg.count, 2);
        let h = build_hierarchy(&seg, &img);
        let boxes = h.scored_boxes();
        assert_eq!(boxes.len(), 3);
        assert_eq!(boxes[0].bbox, BoundingBox::new(0, 0, 8, 10));
        assert_eq!(boxes[1].bbox, BoundingBox::new(8, 0, 12, 10));
        assert_eq!(boxes[2].bbox, BoundingBox::new(0, 0, 20, 10));
        assert_eq!(h.merges, vec![(0, 1)]);
    }

    #[test]
    fn leaf_histograms_are_normalized() {
        let img = RgbImage::from_fn(16, 16, |x, y| Rgb([(x * 16) as u8, (y * 16) as u8, ((x + y) * 8) as u8]));
        let seg = segment_graph(&img, 50.0, 4);
        for r in build_hierarchy(&seg, &img).regions {
            assert!((r.color_hist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!((r.texture_hist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(r.color_hist.iter().chain(&r.texture_hist).all(|&v| v >= 0.0));
            assert!(r.bbox.within(16, 16));
        }
    }

    #[test]
    fn solid_square_is_proposed() {
        let sq = BoundingBox::new(30, 22, 20, 20);
        let img = RgbImage::from_fn(64, 64, |x, y| {
            if sq.contains_point(x as i32, y as i32) {
                Rgb([230, 200, 20])
            } else {
                Rgb([20, 40, 90])
            }
        });
        let seg = segment_graph(&img, 100.0, 20);
        let set = group_regions(&seg, &img);
        let best = set.boxes().iter().map(|b| crate::datamodel::iou(&b.bbox, &sq)).fold(0.0, f64::max);
        assert!(best >= 0.7, "best iou {best}");
    }
}
