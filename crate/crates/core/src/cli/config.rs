//! Run configuration: defaults, then a flat `key = value` file, then flags.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::proposals::ProposalConfig;
use crate::synthbench::SynthSpec;
use crate::trainer::{Preset, TrainingConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(format!("unknown precision {s:?} (expected f32 or f64)")),
        }
    }
}

/// Every tunable setting of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub training: TrainingConfig,
    pub proposals: ProposalConfig,
    pub synth: SynthSpec,
    /// Worker threads for per-image stages; `0` uses every core.
    pub threads: usize,
    pub precision: Precision,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            training: TrainingConfig::default(),
            proposals: ProposalConfig::default(),
            synth: SynthSpec::default(),
            threads: 0,
            precision: Precision::F32,
        }
    }
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V, String>
where
    V::Err: fmt::Display,
{
    value.trim().parse().map_err(|e| format!("invalid value {value:?} for {key}: {e}"))
}

fn parse_list<V: FromStr>(key: &str, value: &str) -> Result<Vec<V>, String>
where
    V::Err: fmt::Display,
{
    value.split(',').map(|v| parse(key, v)).collect()
}

fn join<V: ToString>(values: &[V]) -> String {
    values.iter().map(V::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// `(key, value)` for every setting, in a stable order. Feeding these back
    /// through [`RunConfig::set`] reproduces the configuration.
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        let preset = self.training.preset().map_or_else(|| "custom".to_string(), |p| p.name().to_string());
        let mut out = vec![("preset", preset)];
        out.extend(self.training.describe());
        let p = &self.proposals;
        out.extend([
            ("k_values", join(&p.k_values)),
            ("min_size", p.min_size.to_string()),
            ("max_proposals", p.max_proposals.to_string()),
            ("sigma", p.sigma.to_string()),
            ("max_aspect", p.max_aspect.to_string()),
        ]);
        let s = &self.synth;
        out.extend([
            ("num_classes", s.num_classes.to_string()),
            ("per_class", join(&s.per_class)),
            ("no_logo", join(&s.no_logo)),
            ("image_width", s.width.to_string()),
            ("image_height", s.height.to_string()),
            ("logo_extent", format!("{},{}", s.logo_extent.0, s.logo_extent.1)),
            ("noise_level", s.noise_level.to_string()),
            ("max_distractors", s.max_distractors.to_string()),
            ("threads", self.threads.to_string()),
            ("precision", self.precision.to_string()),
        ]);
        out
    }

    /// Every accepted key.
    pub fn keys() -> Vec<&'static str> {
        RunConfig::default().describe().into_iter().map(|(k, _)| k).collect()
    }

    /// Applies one setting. `seed` seeds both training and data generation;
    /// `preset` sets the six training toggles (`custom` leaves them alone).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        match key {
            "preset" => {
                if value != "custom" {
                    self.training.apply_preset(value.parse::<Preset>()?);
                }
            }
            "seed" => {
                self.training.hyper.seed = parse(key, value)?;
                self.synth.seed = self.training.hyper.seed;
            }
            "k_values" => self.proposals.k_values = parse_list(key, value)?,
            "min_size" => self.proposals.min_size = parse(key, value)?,
            "max_proposals" => self.proposals.max_proposals = parse(key, value)?,
            "sigma" => self.proposals.sigma = parse(key, value)?,
            "max_aspect" => self.proposals.max_aspect = parse(key, value)?,
            "num_classes" => self.synth.num_classes = parse(key, value)?,
            "per_class" | "no_logo" => {
                let v: Vec<usize> = parse_list(key, value)?;
                let v: [usize; 3] = v.try_into().map_err(|_| format!("{key} needs three comma-separated counts (train,val,test)"))?;
                if key == "per_class" {
                    self.synth.per_class = v;
                } else {
                    self.synth.no_logo = v;
                }
            }
            "image_width" => self.synth.width = parse(key, value)?,
            "image_height" => self.synth.height = parse(key, value)?,
            "logo_extent" => {
                let v: Vec<f64> = parse_list(key, value)?;
                let [lo, hi] = v[..] else {
                    return Err(format!("{key} needs two comma-separated fractions (min,max)"));
                };
                self.synth.logo_extent = (lo, hi);
            }
            "noise_level" => self.synth.noise_level = parse(key, value)?,
            "max_distractors" => self.synth.max_distractors = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            "precision" => self.precision = parse(key, value)?,
            _ => return self.training.set(key, value).map_err(|_| format!("unknown configuration key {key:?}")),
        }
        Ok(())
    }

    /// Applies settings in order, except that a `preset` is applied before the
    /// rest so explicit toggles override it.
    pub fn apply<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<(), String> {
        let pairs: Vec<_> = pairs.into_iter().collect();
        for &(k, v) in pairs.iter().filter(|(k, _)| *k == "preset") {
            self.set(k, v)?;
        }
        for &(k, v) in pairs.iter().filter(|(k, _)| *k != "preset") {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Sanity checks that cannot be expressed per key.
    pub fn validate(&self) -> Result<(), String> {
        let h = &self.training.hyper;
        if h.batch_size == 0 || h.epochs == 0 {
            return Err("batch_size and epochs must be positive".into());
        }
        if !(h.lr > 0.0 && h.lr.is_finite()) {
            return Err(format!("lr must be positive, got {}", h.lr));
        }
        if self.proposals.k_values.is_empty() || self.proposals.k_values.iter().any(|k| !(*k > 0.0)) {
            return Err("k_values must be a non-empty list of positive numbers".into());
        }
        self.synth.validate().map_err(|e| e.to_string())
    }

    pub fn to_text(&self) -> String {
        self.describe().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected `key = value`, found {line:?}", i + 1))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Applies a config file on top of `config`, naming the file in errors.
pub fn apply_config_file(config: &mut RunConfig, path: &Path) -> Result<(), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    let pairs = parse_config_text(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    config.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).map_err(|e| format!("{}: {e}", path.display()))
}
