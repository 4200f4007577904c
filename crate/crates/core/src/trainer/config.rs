use std::fmt;
use std::str::FromStr;

/// Which boxes supply positive examples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoxSource {
    /// Ground-truth annotations only.
    Gt,
    /// Ground truth plus object proposals with IoU >= 0.5.
    GtOp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClassBalance {
    None,
    /// Minority classes replicated so every epoch is uniform over classes.
    Epoch,
    /// Every mini-batch is uniform over classes (within one sample).
    Batch,
}

impl fmt::Display for BoxSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoxSource::Gt => "GT",
            BoxSource::GtOp => "GT+OP",
        })
    }
}

impl FromStr for BoxSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "GT" => Ok(BoxSource::Gt),
            "GT+OP" | "GTOP" => Ok(BoxSource::GtOp),
            _ => Err(format!("unknown box source {s:?} (expected GT or GT+OP)")),
        }
    }
}

impl fmt::Display for ClassBalance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassBalance::None => "No",
            ClassBalance::Epoch => "Epoch",
            ClassBalance::Batch => "Batch",
        })
    }
}

impl FromStr for ClassBalance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "no" | "none" => Ok(ClassBalance::None),
            "epoch" => Ok(ClassBalance::Epoch),
            "batch" => Ok(ClassBalance::Batch),
            _ => Err(format!("unknown class balance {s:?} (expected none, epoch or batch)")),
        }
    }
}

/// Optimiser settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparams {
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// The learning rate drops tenfold from this fraction of the epochs on.
    pub lr_decay_at: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { lr: 0.01, momentum: 0.9, batch_size: 64, epochs: 30, seed: 0, lr_decay_at: 2.0 / 3.0 }
    }
}

impl Hyperparams {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if (epoch as f64) >= (self.epochs as f64 * self.lr_decay_at).floor() {
            self.lr * 0.1
        } else {
            self.lr
        }
    }
}

/// How training examples are harvested from the images.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleOptions {
    /// Shifted copies generated per positive when augmenting.
    pub augment_copies: usize,
    /// Maximum shift in pixels at 32x32 crop scale, rescaled to each box.
    pub augment_shift: f64,
    /// Validation images contribute training examples alongside train.
    pub include_val: bool,
    /// Background proposals kept per image, as a random subset. A fractional
    /// part is a probability of keeping one more; `inf` keeps all.
    pub max_background_per_image: f64,
    /// Allows a background class with ground-truth-only positives by running
    /// the proposer solely to collect background regions.
    pub bg_from_proposals: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { augment_copies: 5, augment_shift: 4.0, include_val: true, max_background_per_image: 10.0, bg_from_proposals: true }
    }
}

/// The six training-choice toggles plus optimiser and sampling settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub bg_class: bool,
    pub bbs: BoxSource,
    pub data_augm: bool,
    pub class_balance: ClassBalance,
    pub contrast_norm: bool,
    pub sample_weight: bool,
    pub hyper: Hyperparams,
    pub samples: SampleOptions,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Preset::VII.config()
    }
}

/// The ten named configurations I..X of the training-choice ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preset {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
    IX,
    X,
}

/// `(bg_class, bbs, data_augm, class_balance, contrast_norm, sample_weight)`.
pub type Toggles = (bool, BoxSource, bool, ClassBalance, bool, bool);

impl Preset {
    pub const ALL: [Preset; 10] =
        [Preset::I, Preset::II, Preset::III, Preset::IV, Preset::V, Preset::VI, Preset::VII, Preset::VIII, Preset::IX, Preset::X];

    pub fn name(self) -> &'static str {
        match self {
            Preset::I => "TC-I",
            Preset::II => "TC-II",
            Preset::III => "TC-III",
            Preset::IV => "TC-IV",
            Preset::V => "TC-V",
            Preset::VI => "TC-VI",
            Preset::VII => "TC-VII",
            Preset::VIII => "TC-VIII",
            Preset::IX => "TC-IX",
            Preset::X => "TC-X",
        }
    }

    pub fn toggles(self) -> Toggles {
        use BoxSource::*;
        use ClassBalance as B;
        match self {
            Preset::I => (false, Gt, false, B::None, false, false),
            Preset::II => (true, Gt, false, B::None, false, false),
            Preset::III => (true, GtOp, false, B::None, false, false),
            Preset::IV => (true, GtOp, true, B::None, false, false),
            Preset::V => (true, GtOp, true, B::Epoch, false, false),
            Preset::VI => (true, GtOp, true, B::Batch, false, false),
            Preset::VII => (true, GtOp, true, B::Epoch, true, false),
            Preset::VIII => (true, GtOp, true, B::Epoch, true, true),
            Preset::IX => (true, GtOp, true, B::Batch, true, false),
            Preset::X => (true, GtOp, true, B::Batch, true, true),
        }
    }

    pub fn config(self) -> TrainingConfig {
        let (bg_class, bbs, data_augm, class_balance, contrast_norm, sample_weight) = self.toggles();
        TrainingConfig {
            bg_class,
            bbs,
            data_augm,
            class_balance,
            contrast_norm,
            sample_weight,
            hyper: Hyperparams::default(),
            samples: SampleOptions::default(),
        }
    }

    pub fn names() -> Vec<&'static str> {
        Preset::ALL.iter().map(|p| p.name()).collect()
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    /// Accepts `TC-VII`, `tc-vii` or bare `VII`.
    fn from_str(s: &str) -> Result<Self, String> {
        let up = s.trim().to_ascii_uppercase();
        let bare = up.strip_prefix("TC-").unwrap_or(&up);
        Preset::ALL
            .into_iter()
            .find(|p| &p.name()[3..] == bare)
            .ok_or_else(|| format!("unknown preset {s:?}; valid presets: {}", Preset::names().join(", ")))
    }
}

impl TrainingConfig {
    pub fn toggles(&self) -> Toggles {
        (self.bg_class, self.bbs, self.data_augm, self.class_balance, self.contrast_norm, self.sample_weight)
    }

    /// Sets the six toggles from `preset`, leaving the other settings alone.
    pub fn apply_preset(&mut self, preset: Preset) {
        (self.bg_class, self.bbs, self.data_augm, self.class_balance, self.contrast_norm, self.sample_weight) = preset.toggles();
    }

    /// The preset whose toggles this configuration carries, if any.
    pub fn preset(&self) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.toggles() == self.toggles())
    }

    /// `key = value` lines of every setting, in a stable order.
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        let h = &self.hyper;
        let s = &self.samples;
        vec![
            ("bg_class", self.bg_class.to_string()),
            ("bbs", self.bbs.to_string()),
            ("data_augm", self.data_augm.to_string()),
            ("class_balance", self.class_balance.to_string().to_ascii_lowercase()),
            ("contrast_norm", self.contrast_norm.to_string()),
            ("sample_weight", self.sample_weight.to_string()),
            ("lr", h.lr.to_string()),
            ("momentum", h.momentum.to_string()),
            ("batch_size", h.batch_size.to_string()),
            ("epochs", h.epochs.to_string()),
            ("seed", h.seed.to_string()),
            ("lr_decay_at", h.lr_decay_at.to_string()),
            ("augment_copies", s.augment_copies.to_string()),
            ("augment_shift", s.augment_shift.to_string()),
            ("include_val", s.include_val.to_string()),
            ("max_background_per_image", s.max_background_per_image.to_string()),
            ("bg_from_proposals", s.bg_from_proposals.to_string()),
        ]
    }

    /// Applies one `key = value` setting; unknown keys and bad values are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn parse<V: FromStr>(key: &str, value: &str) -> Result<V, String>
        where
            V::Err: fmt::Display,
        {
            value.parse().map_err(|e| format!("invalid value {value:?} for {key}: {e}"))
        }
        match key {
            "bg_class" => self.bg_class = parse(key, value)?,
            "bbs" => self.bbs = parse(key, value)?,
            "data_augm" => self.data_augm = parse(key, value)?,
            "class_balance" => self.class_balance = parse(key, value)?,
            "contrast_norm" => self.contrast_norm = parse(key, value)?,
            "sample_weight" => self.sample_weight = parse(key, value)?,
            "lr" => self.hyper.lr = parse(key, value)?,
            "momentum" => self.hyper.momentum = parse(key, value)?,
            "batch_size" => self.hyper.batch_size = parse(key, value)?,
            "epochs" => self.hyper.epochs = parse(key, value)?,
            "seed" => self.hyper.seed = parse(key, value)?,
            "lr_decay_at" => self.hyper.lr_decay_at = parse(key, value)?,
            "augment_copies" => self.samples.augment_copies = parse(key, value)?,
            "augment_shift" => self.samples.augment_shift = parse(key, value)?,
            "include_val" => self.samples.include_val = parse(key, value)?,
            "max_background_per_image" => self.samples.max_background_per_image = parse(key, value)?,
            "bg_from_proposals" => self.samples.bg_from_proposals = parse(key, value)?,
            _ => return Err(format!("unknown training setting {key:?}")),
        }
        Ok(())
    }
}
