//! Deterministic synthetic logo dataset in the on-disk dataset layout.

use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::datamodel::{format_sidecar, load_dataset, sidecar_path, BoundingBox, DataError, DatasetIndex, Split, NO_LOGO_DIR};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic dataset spec: {0}")]
    InvalidSpec(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot encode {path}: {message}")]
    Encode { path: PathBuf, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

type Shape = fn(f64, f64) -> bool;
/// Picks colour 0 or 1 at a point inside the shape.
type Pattern = fn(f64, f64) -> usize;

struct Glyph {
    name: &'static str,
    shape: Shape,
    pattern: Pattern,
    colors: [[u8; 3]; 2],
}

fn radius(u: f64, v: f64) -> f64 {
    (u * u + v * v).sqrt()
}

const GLYPHS: [Glyph; 8] = [
    Glyph { name: "ringdisc", shape: |u, v| radius(u, v) <= 1.0, pattern: |u, v| ((radius(u, v) * 3.0) as usize) % 2, colors: [[220, 30, 30], [250, 210, 40]] },
    Glyph { name: "stripetri", shape: |u, v| u.abs() <= (v + 1.0) / 2.0, pattern: |_, v| (((v + 1.0) * 2.0) as usize) % 2, colors: [[30, 60, 200], [240, 240, 240]] },
    Glyph { name: "checksquare", shape: |_, _| true, pattern: |u, v| (((u + 1.0) * 1.5) as usize + ((v + 1.0) * 1.5) as usize) % 2, colors: [[20, 20, 20], [250, 140, 20]] },
    Glyph { name: "splitdiamond", shape: |u, v| u.abs() + v.abs() <= 1.0, pattern: |u, _| (u > 0.0) as usize, colors: [[30, 170, 60], [200, 40, 170]] },
    Glyph { name: "cross", shape: |u, v| u.abs() <= 0.35 || v.abs() <= 0.35, pattern: |u, v| (u.abs() <= 0.35 && v.abs() <= 0.35) as usize, colors: [[30, 200, 210], [20, 30, 110]] },
    Glyph { name: "ringdot", shape: |u, v| (0.5..=1.0).contains(&radius(u, v)) || radius(u, v) <= 0.25, pattern: |u, v| (radius(u, v) <= 0.25) as usize, colors: [[120, 40, 180], [160, 230, 40]] },
    Glyph { name: "stripehex", shape: |u, v| v.abs() <= 0.87 && u.abs() * 0.87 + v.abs() * 0.5 <= 0.87, pattern: |u, _| (((u + 1.0) * 2.5) as usize) % 2, colors: [[0, 128, 128], [250, 150, 190]] },
    Glyph { name: "frame", shape: |_, _| true, pattern: |u, v| { let m = u.abs().max(v.abs()); (m <= 0.65 && m > 0.3) as usize }, colors: [[200, 30, 40], [40, 80, 220]] },
];

/// Muted, non-class colours used for background distractor shapes.
const DISTRACTOR_COLORS: [[u8; 3]; 7] =
    [[140, 90, 50], [120, 120, 40], [90, 100, 120], [200, 170, 120], [70, 60, 60], [175, 175, 165], [110, 75, 95]];

/// Largest supported class count: every glyph under three channel rotations.
pub const MAX_CLASSES: usize = GLYPHS.len() * 3;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub num_classes: usize,
    /// Logo images per class for train, val and test.
    pub per_class: [usize; 3],
    /// No-logo images for train, val and test.
    pub no_logo: [usize; 3],
    pub width: u32,
    pub height: u32,
    /// Glyph extent range as a fraction of the image extent.
    pub logo_extent: (f64, f64),
    /// Amplitude of per-pixel uniform noise (0-255 scale).
    pub noise_level: f64,
    pub max_distractors: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            num_classes: 8,
            per_class: [10, 15, 30],
            no_logo: [0, 60, 120],
            width: 128,
            height: 128,
            logo_extent: (0.15, 0.40),
            noise_level: 6.0,
            max_distractors: 2,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.num_classes == 0 || self.num_classes > MAX_CLASSES {
            return Err(SynthError::InvalidSpec(format!("num_classes must be in 1..={MAX_CLASSES}, got {}", self.num_classes)));
        }
        let (lo, hi) = self.logo_extent;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(SynthError::InvalidSpec(format!("logo extent range {lo}..{hi} must satisfy 0 < lo <= hi <= 1")));
        }
        if self.width.min(self.height) < 16 {
            return Err(SynthError::InvalidSpec(format!("image extents {}x{} are below 16 px", self.width, self.height)));
        }
        Ok(())
    }

    /// Directory names of the generated classes, by generator index.
    pub fn class_names(&self) -> Vec<String> {
        (0..self.num_classes)
            .map(|c| match c / GLYPHS.len() {
                0 => GLYPHS[c].name.to_string(),
                v => format!("{}-v{v}", GLYPHS[c % GLYPHS.len()].name),
            })
            .collect()
    }

    /// Every image to generate, in the fixed order that assigns rng streams.
    pub fn plan(&self) -> Vec<PlannedImage> {
        let names = self.class_names();
        let mut out = Vec::new();
        for (s, split) in Split::ALL.into_iter().enumerate() {
            for (class, name) in names.iter().enumerate() {
                for i in 0..self.per_class[s] {
                    out.push(PlannedImage { split, class: Some(class), rel_path: PathBuf::from(format!("{split}/{name}/{name}_{i:04}.png")), stream: 0 });
                }
            }
            for i in 0..self.no_logo[s] {
                out.push(PlannedImage { split, class: None, rel_path: PathBuf::from(format!("{split}/{NO_LOGO_DIR}/bg_{i:04}.png")), stream: 0 });
            }
        }
        for (i, p) in out.iter_mut().enumerate() {
            p.stream = i as u64;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlannedImage {
    pub split: Split,
    /// Generator class index; `None` for a no-logo image.
    pub class: Option<usize>,
    pub rel_path: PathBuf,
    pub stream: u64,
}

fn glyph_colors(class: usize) -> [[u8; 3]; 2] {
    let rot = class / GLYPHS.len();
    GLYPHS[class % GLYPHS.len()].colors.map(|c| [c[rot % 3], c[(rot + 1) % 3], c[(rot + 2) % 3]])
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn background(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> RgbImage {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let muted = |rng: &mut ChaCha8Rng| {
        let g = rng.gen_range(70.0..190.0);
        [g + rng.gen_range(-25.0..25.0), g + rng.gen_range(-25.0..25.0), g + rng.gen_range(-25.0..25.0)]
    };
    let base = muted(rng);
    let tilt = [rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0)];
    let blobs: Vec<([f64; 3], f64, f64, f64)> = (0..3)
        .map(|_| {
            let c = muted(rng);
            (c, rng.gen_range(0.0..w), rng.gen_range(0.0..h), rng.gen_range(0.15..0.4) * w.max(h))
        })
        .collect();
    let mut img = RgbImage::new(spec.width, spec.height);
    for (x, y, p) in img.enumerate_pixels_mut() {
        let (fx, fy) = (x as f64 / w - 0.5, y as f64 / h - 0.5);
        let mut col = base.map(|b| b + tilt[0] * fx + tilt[1] * fy);
        for (c, bx, by, r) in &blobs {
            let d2 = ((x as f64 - bx).powi(2) + (y as f64 - by).powi(2)) / (r * r);
            let a = (-d2).exp() * 0.6;
            for ch in 0..3 {
                col[ch] = col[ch] * (1.0 - a) + c[ch] * a;
            }
        }
        *p = Rgb(col.map(clamp_u8));
    }
    img
}

fn add_noise(img: &mut RgbImage, level: f64, rng: &mut ChaCha8Rng) {
    if level <= 0.0 {
        return;
    }
    for p in img.pixels_mut() {
        for ch in 0..3 {
            p[ch] = clamp_u8(p[ch] as f64 + rng.gen_range(-level..=level));
        }
    }
}

/// Paints `shape` over the rectangle and returns the bounds of painted pixels.
fn paint(img: &mut RgbImage, rect: (f64, f64, f64, f64), shape: impl Fn(f64, f64) -> Option<[u8; 3]>) -> Option<BoundingBox> {
    let (x0, y0, rw, rh) = rect;
    let mut bounds: Option<(i32, i32, i32, i32)> = None;
    let xs = (x0.floor().max(0.0) as u32)..((x0 + rw).ceil().min(img.width() as f64) as u32);
    for py in (y0.floor().max(0.0) as u32)..((y0 + rh).ceil().min(img.height() as f64) as u32) {
        for px in xs.clone() {
            let u = (px as f64 + 0.5 - x0) / rw * 2.0 - 1.0;
            let v = (py as f64 + 0.5 - y0) / rh * 2.0 - 1.0;
            if u.abs() > 1.0 || v.abs() > 1.0 {
                continue;
            }
            if let Some(c) = shape(u, v) {
                img.put_pixel(px, py, Rgb(c));
                let (px, py) = (px as i32, py as i32);
                bounds = Some(match bounds {
                    None => (px, py, px, py),
                    Some((a, b, c, d)) => (a.min(px), b.min(py), c.max(px), d.max(py)),
                });
            }
        }
    }
    bounds.map(|(a, b, c, d)| BoundingBox::new(a, b, (c - a + 1) as u32, (d - b + 1) as u32))
}

/// Renders one image; returns it with the tight box of the glyph, if any.
pub fn render_image(spec: &SynthSpec, class: Option<usize>, stream: u64) -> (RgbImage, Option<BoundingBox>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    let mut img = background(spec, &mut rng);
    let (w, h) = (spec.width as f64, spec.height as f64);
    let extent = w.min(h);

    let logo_rect = class.map(|_| {
        let side = rng.gen_range(spec.logo_extent.0..=spec.logo_extent.1) * extent;
        let aspect: f64 = rng.gen_range(0.8..1.25);
        let (gw, gh) = ((side * aspect.sqrt()).min(w), (side / aspect.sqrt()).min(h));
        (rng.gen_range(0.0..=(w - gw)), rng.gen_range(0.0..=(h - gh)), gw, gh)
    });
    let n_distractors = rng.gen_range(0..=spec.max_distractors);
    for _ in 0..n_distractors {
        for _attempt in 0..20 {
            let (dw, dh) = (rng.gen_range(0.1..0.35) * extent, rng.gen_range(0.1..0.35) * extent);
            let (dx, dy) = (rng.gen_range(0.0..w - dw), rng.gen_range(0.0..h - dh));
            let c0 = rng.gen_range(0..DISTRACTOR_COLORS.len());
            let c1 = (c0 + rng.gen_range(1..DISTRACTOR_COLORS.len())) % DISTRACTOR_COLORS.len();
            let colors = [DISTRACTOR_COLORS[c0], DISTRACTOR_COLORS[c1]];
            // half plain blobs, half glyph look-alikes in non-class colours
            let kind = rng.gen_range(0..2 * GLYPHS.len());
            let overlaps = logo_rect.is_some_and(|(lx, ly, lw, lh)| dx < lx + lw && lx < dx + dw && dy < ly + lh && ly < dy + dh);
            if overlaps {
                continue;
            }
            match kind.checked_sub(GLYPHS.len()) {
                Some(g) => paint(&mut img, (dx, dy, dw, dh), |u, v| (GLYPHS[g].shape)(u, v).then(|| colors[(GLYPHS[g].pattern)(u, v)])),
                None => paint(&mut img, (dx, dy, dw, dh), |u, v| (kind % 2 == 0 || radius(u, v) <= 1.0).then_some(colors[0])),
            };
            break;
        }
    }
    let bbox = class.zip(logo_rect).and_then(|(c, rect)| {
        let g = &GLYPHS[c % GLYPHS.len()];
        let colors = glyph_colors(c);
        paint(&mut img, rect, |u, v| (g.shape)(u, v).then(|| colors[(g.pattern)(u, v)]))
    });
    // noise last, so glyph pixels are perturbed too, but never recoloured to
    // the point of moving the box: the box was taken from the mask above
    add_noise(&mut img, spec.noise_level, &mut rng);
    (img, bbox)
}

/// Writes the dataset under `root` and loads it back as an index.
pub fn generate(spec: &SynthSpec, root: &Path) -> Result<DatasetIndex, SynthError> {
    spec.validate()?;
    let plan = spec.plan();
    plan.par_iter().try_for_each(|item| -> Result<(), SynthError> {
        let path = root.join(&item.rel_path);
        let dir = path.parent().expect("planned paths have a parent");
        fs::create_dir_all(dir).map_err(|source| SynthError::Io { path: dir.to_path_buf(), source })?;
        let (img, bbox) = render_image(spec, item.class, item.stream);
        img.save(&path).map_err(|e| SynthError::Encode { path: path.clone(), message: e.to_string() })?;
        if let Some(b) = bbox {
            let side = sidecar_path(&path);
            fs::write(&side, format_sidecar(&[b])).map_err(|source| SynthError::Io { path: side, source })?;
        }
        Ok(())
    })?;
    let (index, warnings) = load_dataset(root)?;
    debug_assert!(warnings.is_empty(), "generated annotations were clipped: {warnings:?}");
    Ok(index)
}
