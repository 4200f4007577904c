//! Model file: a plain-text header followed by little-endian `f32` parameters.
//!
//! ```text
//! LOGOREC-MODEL
//! version 1
//! classes 2
//! class adidas
//! class apple
//! norm 0.5 0.5 0.5 0.25 0.25 0.25      (or: norm none)
//! threshold 0.42
//! param 0 weight 5 5 3 32
//! param 0 bias 32
//! ...                                   (one line per tensor, layer order)
//! payload 145513
//! end
//! <payload: 4 bytes per parameter, little-endian IEEE-754 f32, in manifest order>
//! ```
//!
//! Parameters are down-cast to `f32` on save and up-cast on load, so a
//! save/load round trip is exact for values already representable in `f32`.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{layer_stack, LayerSpec, LogoNet};
use crate::datamodel::NormStats;
use crate::nncore::{NnError, Scalar, Tensor};

pub const MODEL_MAGIC: &str = "LOGOREC-MODEL";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {found} (expected {MODEL_VERSION})")]
    VersionMismatch { found: String },
    #[error("malformed model header: {0}")]
    Header(String),
    #[error("shape manifest mismatch: {0}")]
    ShapeManifest(String),
    #[error("truncated model payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Network(#[from] NnError),
}

/// A trained classifier with everything needed to run it on new images.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub net: LogoNet<T>,
    /// Per-channel statistics, present when trained with contrast normalisation.
    pub norm: Option<NormStats>,
    /// Confidence a logo class must exceed to be reported.
    pub threshold: f64,
    /// Logo class names; the background class is the extra last output.
    pub class_names: Vec<String>,
}

impl<T: Scalar> Model<T> {
    pub fn new(net: LogoNet<T>, norm: Option<NormStats>, threshold: f64, class_names: Vec<String>) -> Result<Self, ModelError> {
        if class_names.len() + 1 != net.num_outputs() {
            return Err(ModelError::ShapeManifest(format!(
                "{} class names for a network with {} outputs (classes + background)",
                class_names.len(),
                net.num_outputs()
            )));
        }
        if let Some(bad) = class_names.iter().find(|c| c.is_empty() || c.chars().any(char::is_whitespace)) {
            return Err(ModelError::Header(format!("class name {bad:?} must be a non-empty token")));
        }
        Ok(Model { net, norm, threshold, class_names })
    }

    pub fn num_outputs(&self) -> usize {
        self.net.num_outputs()
    }

    pub fn background_index(&self) -> usize {
        self.class_names.len()
    }

    /// The same model with parameters rounded to their on-disk precision.
    pub fn storage_rounded(&self) -> Self {
        let net: LogoNet<f32> = self.net.cast();
        Model { net: net.cast(), norm: self.norm, threshold: self.threshold, class_names: self.class_names.clone() }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = format!("{MODEL_MAGIC}\nversion {MODEL_VERSION}\nclasses {}\n", self.class_names.len());
        for c in &self.class_names {
            header += &format!("class {c}\n");
        }
        match &self.norm {
            Some(n) => {
                header += "norm";
                for v in n.mean.iter().chain(&n.std) {
                    header += &format!(" {v:?}");
                }
                header += "\n";
            }
            None => header += "norm none\n",
        }
        header += &format!("threshold {:?}\n", self.threshold);
        let mut total = 0;
        for (i, l) in self.net.params().layers.iter().enumerate() {
            for (kind, t) in [("weight", &l.weight), ("bias", &l.bias)] {
                let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
                header += &format!("param {i} {kind} {}\n", dims.join(" "));
                total += t.len();
            }
        }
        header += &format!("payload {total}\nend\n");
        let mut bytes = header.into_bytes();
        bytes.reserve(total * 4);
        for l in &self.net.params().layers {
            for v in l.weight.data().iter().chain(l.bias.data()) {
                bytes.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
            }
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let first_line = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
        if first_line != MODEL_MAGIC.as_bytes() {
            return Err(ModelError::BadMagic);
        }
        const END: &[u8] = b"\nend\n";
        let end = bytes
            .windows(END.len())
            .position(|w| w == END)
            .ok_or_else(|| ModelError::Header("missing end-of-header marker".into()))?;
        let header = std::str::from_utf8(&bytes[..end]).map_err(|_| ModelError::Header("header is not UTF-8".into()))?;
        let payload = &bytes[end + END.len()..];

        let mut lines = header.lines().skip(1);
        let mut next = |key: &str| -> Result<Vec<&str>, ModelError> {
            let line = lines.next().ok_or_else(|| ModelError::Header(format!("missing `{key}` line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(ModelError::Header(format!("expected `{key}`, found {line:?}")));
            }
            Ok(parts.collect())
        };

        let version = next("version")?;
        if version != [MODEL_VERSION.to_string().as_str()] {
            return Err(ModelError::VersionMismatch { found: version.join(" ") });
        }
        let class_count: usize = parse_one(&next("classes")?, "classes")?;
        let mut class_names = Vec::with_capacity(class_count);
        for _ in 0..class_count {
            class_names.push(parse_one::<String>(&next("class")?, "class")?);
        }
        let norm_fields = next("norm")?;
        let norm = if norm_fields == ["none"] {
            None
        } else {
            let v: Vec<f64> = norm_fields.iter().map(|s| parse_float(s)).collect::<Result<_, _>>()?;
            if v.len() != 6 {
                return Err(ModelError::Header(format!("norm needs 6 values, got {}", v.len())));
            }
            Some(NormStats { mean: [v[0], v[1], v[2]], std: [v[3], v[4], v[5]] })
        };
        let threshold = parse_float(&parse_one::<String>(&next("threshold")?, "threshold")?)?;

        let expected: Vec<Vec<usize>> = layer_stack(class_count + 1)
            .iter()
            .filter_map(LayerSpec::param_shapes)
            .flat_map(|(w, b)| [w, b])
            .collect();
        let mut shapes = Vec::with_capacity(expected.len());
        for (i, want) in expected.iter().enumerate() {
            let fields = next("param")?;
            let kind = if i % 2 == 0 { "weight" } else { "bias" };
            if fields.len() < 2 || fields[0] != (i / 2).to_string() || fields[1] != kind {
                return Err(ModelError::ShapeManifest(format!("entry {i} should be `param {} {kind} ..`", i / 2)));
            }
            let dims: Vec<usize> = fields[2..]
                .iter()
                .map(|d| d.parse().map_err(|_| ModelError::Header(format!("bad extent {d:?}"))))
                .collect::<Result<_, _>>()?;
            if &dims != want {
                return Err(ModelError::ShapeManifest(format!(
                    "layer {} {kind}: file has {dims:?}, a {}-class network needs {want:?}",
                    i / 2,
                    class_count
                )));
            }
            shapes.push(dims);
        }
        let total: usize = parse_one(&next("payload")?, "payload")?;
        let manifest_total: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
        if total != manifest_total {
            return Err(ModelError::ShapeManifest(format!("payload {total} != manifest total {manifest_total}")));
        }
        if payload.len() != total * 4 {
            return Err(ModelError::Truncated { expected: total * 4, found: payload.len() });
        }

        let mut values = payload
            .chunks_exact(4)
            .map(|c| T::from_f64_lossy(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64));
        let mut tensors = shapes.into_iter().map(|s| {
            let n = s.iter().product();
            Tensor::new(s, values.by_ref().take(n).collect())
        });
        let mut weights = Vec::new();
        while let (Some(w), Some(b)) = (tensors.next(), tensors.next()) {
            weights.push((w?, b?));
        }
        let net = LogoNet::from_params(class_count + 1, weights)?;
        Model::new(net, norm, threshold, class_names)
    }
}

fn parse_one<V: std::str::FromStr>(fields: &[&str], key: &str) -> Result<V, ModelError> {
    match fields {
        [v] => v.parse().map_err(|_| ModelError::Header(format!("bad `{key}` value {v:?}"))),
        _ => Err(ModelError::Header(format!("`{key}` takes exactly one value"))),
    }
}

fn parse_float(s: &str) -> Result<f64, ModelError> {
    s.parse().map_err(|_| ModelError::Header(format!("bad number {s:?}")))
}

pub fn save_model<T: Scalar>(model: &Model<T>, path: &Path) -> Result<(), ModelError> {
    fs::write(path, model.to_bytes()).map_err(|source| ModelError::Io { path: path.display().to_string(), source })
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Model<T>, ModelError> {
    let bytes = fs::read(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    Model::from_bytes(&bytes)
}

/// Loads a model and checks that it has `num_outputs` outputs.
pub fn load_model_expecting<T: Scalar>(path: &Path, num_outputs: usize) -> Result<Model<T>, ModelError> {
    let model = load_model::<T>(path)?;
    if model.num_outputs() != num_outputs {
        return Err(ModelError::ShapeManifest(format!(
            "model has {} outputs, evaluation expects {num_outputs}",
            model.num_outputs()
        )));
    }
    Ok(model)
}
