use image::RgbImage;

/// Per-pixel component labels in `[0, count)`, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentationMap {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
    pub count: usize,
}

impl SegmentationMap {
    pub fn label(&self, x: u32, y: u32) -> u32 {
        self.labels[(y * self.width + x) as usize]
    }
}

struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
    /// Largest edge weight inside each component's spanning tree.
    internal: Vec<f32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n as u32).collect(), size: vec![1; n], internal: vec![0.0; n] }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32, weight: f32) {
        let (big, small) = if self.size[a as usize] >= self.size[b as usize] { (a, b) } else { (b, a) };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        self.internal[big as usize] = weight;
    }
}

#[derive(Clone, Copy)]
struct Edge {
    a: u32,
    b: u32,
    w: f32,
}

/// Optional Gaussian pre-smoothing; returns float RGB planes interleaved.
fn smoothed(image: &RgbImage, sigma: f64) -> Vec<f32> {
    let raw: Vec<f32> = image.as_raw().iter().map(|&v| v as f32).collect();
    if sigma <= 0.0 {
        return raw;
    }
    let radius = (sigma * 4.0).ceil() as i64;
    let kernel: Vec<f32> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp() as f32).collect();
    let norm: f32 = kernel.iter().sum();
    let (w, h) = (image.width() as i64, image.height() as i64);
    let pass = |src: &[f32], horizontal: bool| -> Vec<f32> {
        let mut dst = vec![0.0f32; src.len()];
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let mut acc = 0.0;
                    for (j, &kv) in kernel.iter().enumerate() {
                        let off = j as i64 - radius;
                        let (sx, sy) = if horizontal { ((x + off).clamp(0, w - 1), y) } else { (x, (y + off).clamp(0, h - 1)) };
                        acc += kv * src[((sy * w + sx) * 3 + c) as usize];
                    }
                    dst[((y * w + x) * 3 + c) as usize] = acc / norm;
                }
            }
        }
        dst
    };
    pass(&pass(&raw, true), false)
}

/// Graph-based segmentation on the 8-connected pixel grid.
///
/// Edge weights are Euclidean RGB distances (0-255 scale). Two components merge
/// when the joining edge is no heavier than either component's internal
/// difference plus `k / size`. Components below `min_size` pixels are then
/// merged across the lightest remaining edges. Labels are numbered in
/// row-major order of first appearance.
pub fn segment_graph(image: &RgbImage, k: f64, min_size: usize) -> SegmentationMap {
    segment_graph_smoothed(image, k, min_size, 0.0)
}

/// [`segment_graph`] after Gaussian pre-smoothing with `sigma` (`0` disables it).
pub fn segment_graph_smoothed(image: &RgbImage, k: f64, min_size: usize, sigma: f64) -> SegmentationMap {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let n = w * h;
    if n == 0 {
        return SegmentationMap { width: image.width(), height: image.height(), labels: Vec::new(), count: 0 };
    }
    let px = smoothed(image, sigma);
    let dist = |a: usize, b: usize| -> f32 {
        let (p, q) = (&px[a * 3..a * 3 + 3], &px[b * 3..b * 3 + 3]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    };
    let mut edges = Vec::with_capacity(n * 4);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut push = |j: usize| edges.push(Edge { a: i as u32, b: j as u32, w: dist(i, j) });
            if x + 1 < w {
                push(i + 1);
            }
            if y + 1 < h {
                push(i + w);
                if x + 1 < w {
                    push(i + w + 1);
                }
                if x > 0 {
                    push(i + w - 1);
                }
            }
        }
    }
    // stable: equal weights keep generation order
    edges.sort_by(|e, f| e.w.total_cmp(&f.w));

    let k = k as f32;
    let mut set = DisjointSet::new(n);
    for e in &edges {
        let (a, b) = (set.find(e.a), set.find(e.b));
        if a == b {
            continue;
        }
        let ta = set.internal[a as usize] + k / set.size[a as usize] as f32;
        let tb = set.internal[b as usize] + k / set.size[b as usize] as f32;
        if e.w <= ta.min(tb) {
            set.union(a, b, e.w);
        }
    }
    for e in &edges {
        let (a, b) = (set.find(e.a), set.find(e.b));
        if a != b && ((set.size[a as usize] as usize) < min_size || (set.size[b as usize] as usize) < min_size) {
            let keep = set.internal[a as usize].max(set.internal[b as usize]).max(e.w);
            set.union(a, b, keep);
        }
    }

    let mut remap = vec![u32::MAX; n];
    let mut labels = Vec::with_capacity(n);
    let mut count = 0u32;
    for i in 0..n {
        let root = set.find(i as u32) as usize;
        if remap[root] == u32::MAX {
            remap[root] = count;
            count += 1;
        }
        labels.push(remap[root]);
    }
    SegmentationMap { width: image.width(), height: image.height(), labels, count: count as usize }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn contiguous(seg: &SegmentationMap) -> bool {
        let mut seen = vec![false; seg.count];
        for &l in &seg.labels {
            seen[l as usize] = true;
        }
        seen.into_iter().all(|s| s) && seg.labels.len() == (seg.width * seg.height) as usize
    }

    #[test]
    fn uniform_image_is_one_component() {
        let img = RgbImage::from_pixel(17, 9, Rgb([40, 80, 120]));
        let seg = segment_graph(&img, 100.0, 20);
        assert_eq!(seg.count, 1);
        assert!(contiguous(&seg));
    }

    #[test]
    fn two_contrasting_halves() {
        let img = RgbImage::from_fn(20, 12, |x, _| if x < 10 { Rgb([0, 0, 0]) } else { Rgb([255, 255, 255]) });
        let seg = segment_graph(&img, 1.0, 5);
        assert_eq!(seg.count, 2);
        assert_eq!(seg.label(0, 0), 0);
        assert_eq!(seg.label(19, 11), 1);
        assert!(contiguous(&seg));
    }

    #[test]
    fn single_pixel_image() {
        let img = RgbImage::from_pixel(1, 1, Rgb([1, 2, 3]));
        assert_eq!(segment_graph_smoothed(&img, 100.0, 20, 0.8).count, 1);
    }

    #[test]
    fn small_components_are_absorbed() {
        let img = RgbImage::from_fn(30, 30, |x, y| if (14..16).contains(&x) && (14..16).contains(&y) { Rgb([255, 0, 0]) } else { Rgb([0, 0, 255]) });
        assert_eq!(segment_graph(&img, 1.0, 1).count, 2);
        assert_eq!(segment_graph(&img, 1.0, 5).count, 1);
    }
}
