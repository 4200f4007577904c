//! On-disk dataset layout:
//!
//! ```text
//! <root>/<split>/<class>/<image>.{jpg,jpeg,png}
//! <root>/<split>/<class>/<image>.<ext>.bboxes.txt   # "x y width height" header,
//!                                                   # then one integer quadruple per logo
//! <root>/<split>/no-logo/<image>.<ext>              # images without logos, no sidecar
//! ```
//!
//! Splits are `train`, `val` and `test`; a missing split directory is an empty
//! split. The class table is the sorted set of class directory names (other
//! than `no-logo`); the background class takes the index after the last logo.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;

use super::{Annotation, BoundingBox, DataError};

pub const NO_LOGO_DIR: &str = "no-logo";
pub const SIDECAR_SUFFIX: &str = ".bboxes.txt";
pub const SIDECAR_HEADER: &str = "x y width height";
const IMAGE_EXTENSIONS: [&str; 3] = ["jpg", "jpeg", "png"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.dir_name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown split {s:?} (expected train, val or test)"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageRecord {
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    /// Image-level label: index into the class table, `None` for no-logo images.
    pub label: Option<usize>,
    pub annotations: Vec<Annotation>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetIndex {
    /// Logo class names, sorted. Background is index `classes.len()`.
    pub classes: Vec<String>,
    pub splits: BTreeMap<Split, Vec<ImageRecord>>,
}

impl DatasetIndex {
    pub fn split(&self, split: Split) -> &[ImageRecord] {
        self.splits.get(&split).map(Vec::as_slice).unwrap_or_default()
    }

    pub fn background_index(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(name)).ok()
    }

    pub fn images(&self, splits: &[Split]) -> Vec<&ImageRecord> {
        splits.iter().flat_map(|&s| self.split(s)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.values().all(Vec::is_empty)
    }
}

pub fn load_rgb(path: &Path) -> Result<RgbImage, DataError> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|e| DataError::Image { path: path.to_path_buf(), message: e.to_string() })
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, DataError> {
    let mut entries = Vec::new();
    for entry in fs::read_dir(dir).map_err(|source| DataError::Io { path: dir.to_path_buf(), source })? {
        entries.push(entry.map_err(|source| DataError::Io { path: dir.to_path_buf(), source })?.path());
    }
    entries.sort();
    Ok(entries)
}

/// Whether the file extension is one the loader reads.
pub fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

pub fn sidecar_path(image: &Path) -> PathBuf {
    let mut s = image.as_os_str().to_owned();
    s.push(SIDECAR_SUFFIX);
    PathBuf::from(s)
}

/// Parses a sidecar file body into boxes (unclipped).
pub fn parse_sidecar(path: &Path, text: &str) -> Result<Vec<BoundingBox>, DataError> {
    let bad = |line: usize, message: String| DataError::Annotation { path: path.to_path_buf(), line, message };
    let mut boxes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.split_whitespace().eq(SIDECAR_HEADER.split_whitespace())) {
            continue;
        }
        let nums: Vec<i64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(i + 1, format!("not an integer: {t:?}"))))
            .collect::<Result<_, _>>()?;
        let [x, y, w, h] = nums[..] else {
            return Err(bad(i + 1, format!("expected 4 integers, found {}", nums.len())));
        };
        if w <= 0 || h <= 0 {
            return Err(bad(i + 1, format!("non-positive extent {w}x{h}")));
        }
        let fit = |v: i64| i32::try_from(v).map_err(|_| bad(i + 1, format!("coordinate {v} out of range")));
        boxes.push(BoundingBox::new(fit(x)?, fit(y)?, fit(w)? as u32, fit(h)? as u32));
    }
    Ok(boxes)
}

pub fn format_sidecar(boxes: &[BoundingBox]) -> String {
    let mut s = format!("{SIDECAR_HEADER}\n");
    for b in boxes {
        s += &format!("{b}\n");
    }
    s
}

/// Reads the dataset layout under `root`. Annotations reaching past the image
/// edge are clipped; each clip is reported in the returned warnings (and logged).
pub fn load_dataset(root: &Path) -> Result<(DatasetIndex, Vec<String>), DataError> {
    let mut warnings = Vec::new();
    if !root.exists() {
        return Err(DataError::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root does not exist"),
        });
    }
    let mut class_dirs: BTreeMap<Split, Vec<(String, PathBuf)>> = BTreeMap::new();
    let mut classes = BTreeSet::new();
    for split in Split::ALL {
        let dir = root.join(split.dir_name());
        if !dir.is_dir() {
            continue;
        }
        for p in sorted_entries(&dir)?.into_iter().filter(|p| p.is_dir()) {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            if name != NO_LOGO_DIR {
                if name.chars().any(char::is_whitespace) {
                    return Err(DataError::Layout(format!("class directory {p:?} contains whitespace")));
                }
                classes.insert(name.clone());
            }
            class_dirs.entry(split).or_default().push((name, p));
        }
    }
    let classes: Vec<String> = classes.into_iter().collect();
    let mut index = DatasetIndex { classes, splits: BTreeMap::new() };

    for (split, dirs) in class_dirs {
        let mut records = Vec::new();
        for (name, dir) in dirs {
            let label = (name != NO_LOGO_DIR).then(|| index.class_index(&name).expect("class table built from dirs"));
            for img in sorted_entries(&dir)?.into_iter().filter(|p| p.is_file() && is_image(p)) {
                let (width, height) = image::image_dimensions(&img)
                    .map_err(|e| DataError::Image { path: img.clone(), message: e.to_string() })?;
                let mut annotations = Vec::new();
                if let Some(class) = label {
                    let side = sidecar_path(&img);
                    let text = fs::read_to_string(&side).map_err(|_| DataError::MissingAnnotations { image: img.clone() })?;
                    for b in parse_sidecar(&side, &text)? {
                        let clipped = b.clip(width, height).ok_or(DataError::BoxOutsideImage { bbox: b, width, height })?;
                        if clipped != b {
                            let msg = format!("{}: box {b} clipped to {clipped} ({width}x{height} image)", side.display());
                            log::warn!("{msg}");
                            warnings.push(msg);
                        }
                        annotations.push(Annotation { bbox: clipped, class });
                    }
                }
                records.push(ImageRecord { path: img, width, height, label, annotations });
            }
        }
        index.splits.insert(split, records);
    }
    Ok((index, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn write_image(path: &Path, w: u32, h: u32) {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        RgbImage::from_pixel(w, h, Rgb([9, 9, 9])).save(path).unwrap();
    }

    #[test]
    fn empty_root_gives_empty_index() {
        let dir = tempfile::tempdir().unwrap();
        let (index, warnings) = load_dataset(dir.path()).unwrap();
        assert!(index.is_empty() && index.classes.is_empty() && warnings.is_empty());
    }

    #[test]
    fn one_image_one_annotation() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("train/adidas/1.png");
        write_image(&img, 40, 30);
        fs::write(sidecar_path(&img), "x y width height\n3 4 10 12\n").unwrap();
        let (index, warnings) = load_dataset(dir.path()).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(index.classes, vec!["adidas"]);
        let recs = index.split(Split::Train);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].annotations, vec![Annotation { bbox: BoundingBox::new(3, 4, 10, 12), class: 0 }]);
        assert_eq!(recs[0].label, Some(0));
    }

    #[test]
    fn overhanging_annotation_is_clipped_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("val/apple/a.png");
        write_image(&img, 20, 20);
        fs::write(sidecar_path(&img), "x y width height\n15 15 10 10\n").unwrap();
        let (index, warnings) = load_dataset(dir.path()).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(index.split(Split::Val)[0].annotations[0].bbox, BoundingBox::new(15, 15, 5, 5));
    }

    #[test]
    fn missing_sidecar_and_bad_image_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_image(&dir.path().join("train/bmw/x.png"), 8, 8);
        assert!(matches!(load_dataset(dir.path()), Err(DataError::MissingAnnotations { .. })));

        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("test/no-logo/broken.jpg");
        fs::create_dir_all(bad.parent().unwrap()).unwrap();
        fs::write(&bad, b"not a jpeg").unwrap();
        match load_dataset(dir.path()) {
            Err(DataError::Image { path, .. }) => assert_eq!(path, bad),
            other => panic!("expected image error, got {other:?}"),
        }
    }

    #[test]
    fn no_logo_images_need_no_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        write_image(&dir.path().join("test/no-logo/n.png"), 8, 8);
        write_image(&dir.path().join("test/zeta/z.png"), 8, 8);
        fs::write(dir.path().join("test/zeta/z.png.bboxes.txt"), "x y width height\n0 0 8 8\n").unwrap();
        let (index, _) = load_dataset(dir.path()).unwrap();
        assert_eq!(index.classes, vec!["zeta"]);
        assert_eq!(index.background_index(), 1);
        let labels: Vec<_> = index.split(Split::Test).iter().map(|r| r.label).collect();
        assert_eq!(labels, vec![None, Some(0)]);
    }

    #[test]
    fn sidecar_format_roundtrip() {
        let boxes = vec![BoundingBox::new(1, 2, 3, 4), BoundingBox::new(10, 0, 7, 9)];
        assert_eq!(parse_sidecar(Path::new("s"), &format_sidecar(&boxes)).unwrap(), boxes);
        assert!(parse_sidecar(Path::new("s"), "x y width height\n1 2 3\n").is_err());
    }
}
