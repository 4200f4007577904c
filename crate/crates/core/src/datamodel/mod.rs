//! Dataset ingestion and training-example plumbing: boxes and IoU, proposal
//! labelling, crop extraction, shift augmentation, class balancing and
//! contrast-normalisation statistics.

mod augment;
mod balance;
mod bbox;
mod crop;
mod dataset;
mod label;
mod norm;

use std::path::PathBuf;

use thiserror::Error;

pub use augment::augment_shifts;
pub use balance::{balance_batch, balance_epoch, BalancedBatches};
pub use bbox::{iou, BoundingBox};
pub use crop::crop_resize;
pub use dataset::{
    format_sidecar, is_image, load_dataset, load_rgb, parse_sidecar, sidecar_path, DatasetIndex, ImageRecord, Split,
    NO_LOGO_DIR, SIDECAR_HEADER, SIDECAR_SUFFIX,
};
pub use label::{label_proposals, ProposalLabel, POSITIVE_IOU};
pub use norm::{apply_norm, compute_norm_stats, invert_norm, NormStats, MIN_STD};

/// A ground-truth logo box and its class index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub bbox: BoundingBox,
    pub class: usize,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot read image {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("missing annotation file for logo image {image}")]
    MissingAnnotations { image: PathBuf },
    #[error("{path}:{line}: {message}")]
    Annotation { path: PathBuf, line: usize, message: String },
    #[error("box {bbox} lies outside the {width}x{height} image")]
    BoxOutsideImage { bbox: BoundingBox, width: u32, height: u32 },
    #[error("dataset layout: {0}")]
    Layout(String),
}
