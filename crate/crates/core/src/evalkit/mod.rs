//! Image-level precision / recall / F1 / accuracy, the training-choice
//! ablation table and the pipeline timing report.
//!
//! Metric semantics: a decision naming logo class `c` is a true positive
//! when the image's label is `c`, otherwise a false positive; a NO-LOGO
//! decision on a logo image is a false negative, and so is a wrong class on
//! a logo image (which is also a false positive). Precision, recall and F1
//! are 0 when their denominators are 0.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::datamodel::{load_rgb, DatasetIndex, ImageRecord, Split};
use crate::inference::{classify_image, StageTimings, NO_LOGO};
use crate::logonet::Model;
use crate::nncore::Scalar;
use crate::proposals::Proposer;
use crate::trainer::{train, TrainError, TrainReport, TrainingConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no ground-truth label for image {0}")]
    UnknownImage(PathBuf),
    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },
    #[error(transparent)]
    Train(#[from] TrainError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `confusion[truth][predicted]`, index `C` (last) is NO-LOGO.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores `(predicted, truth)` pairs, `None` meaning NO-LOGO.
pub fn evaluate_pairs(pairs: &[(Option<usize>, Option<usize>)], num_classes: usize) -> Result<EvalResult, EvalError> {
    let mut confusion = vec![vec![0usize; num_classes + 1]; num_classes + 1];
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let slot = |c: Option<usize>| -> Result<usize, EvalError> {
        match c {
            Some(i) if i >= num_classes => Err(EvalError::ClassOutOfRange { index: i, classes: num_classes }),
            Some(i) => Ok(i),
            None => Ok(num_classes),
        }
    };
    for &(pred, truth) in pairs {
        confusion[slot(truth)?][slot(pred)?] += 1;
        match (pred, truth) {
            (Some(p), Some(t)) if p == t => tp += 1,
            (Some(_), Some(_)) => {
                fp += 1;
                fn_ += 1;
            }
            (Some(_), None) => fp += 1,
            (None, Some(_)) => fn_ += 1,
            (None, None) => {}
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    let correct: usize = (0..=num_classes).map(|i| confusion[i][i]).sum();
    Ok(EvalResult { precision, recall, f1, accuracy: ratio(correct, pairs.len()), tp, fp, fn_, confusion })
}

/// Scores per-path decisions against ground-truth labels; every decided path
/// must have a label.
pub fn evaluate(
    decisions: &[(PathBuf, Option<usize>)],
    truth: &BTreeMap<PathBuf, Option<usize>>,
    num_classes: usize,
) -> Result<EvalResult, EvalError> {
    let pairs = decisions
        .iter()
        .map(|(p, d)| truth.get(p).map(|t| (*d, *t)).ok_or_else(|| EvalError::UnknownImage(p.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    evaluate_pairs(&pairs, num_classes)
}

/// Ground-truth image labels of the given records.
pub fn truth_labels<'a>(records: impl IntoIterator<Item = &'a ImageRecord>) -> BTreeMap<PathBuf, Option<usize>> {
    records.into_iter().map(|r| (r.path.clone(), r.label)).collect()
}

/// Classifies every record and scores the decisions.
pub fn evaluate_model<T: Scalar>(model: &Model<T>, records: &[ImageRecord], proposer: &dyn Proposer) -> Result<EvalResult, EvalError> {
    let pairs = records
        .par_iter()
        .map(|r| -> Result<_, TrainError> {
            let image = load_rgb(&r.path).map_err(TrainError::from)?;
            Ok((classify_image(&image, model, proposer).map_err(TrainError::from)?.predicted, r.label))
        })
        .collect::<Result<Vec<_>, _>>()?;
    evaluate_pairs(&pairs, model.class_names.len())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub id: String,
    pub config: TrainingConfig,
    pub result: EvalResult,
}

/// Trains and evaluates each named configuration (on the test split) in order.
pub fn run_ablation<T: Scalar>(
    configs: &[(String, TrainingConfig)],
    dataset: &DatasetIndex,
    proposer: &dyn Proposer,
    mut on_row: impl FnMut(&AblationRow, &TrainReport),
) -> Result<Vec<AblationRow>, EvalError> {
    let mut rows = Vec::with_capacity(configs.len());
    for (id, config) in configs {
        let (model, report) = train::<T>(config, dataset, proposer)?;
        let result = evaluate_model(&model, dataset.split(Split::Test), proposer)?;
        let row = AblationRow { id: id.clone(), config: config.clone(), result };
        on_row(&row, &report);
        rows.push(row);
    }
    Ok(rows)
}

const ABLATION_HEADER: [&str; 11] =
    ["Train. Config.", "BG class", "BBs", "Data Augm.", "Class bal.", "Contr. norm.", "Sample weight", "Prec.", "Rec.", "F1", "Acc."];

fn yes_no(b: bool) -> String {
    if b { "Yes" } else { "No" }.to_string()
}

fn ablation_cells(row: &AblationRow) -> Vec<String> {
    let c = &row.config;
    let r = &row.result;
    vec![
        row.id.clone(),
        yes_no(c.bg_class),
        c.bbs.to_string(),
        yes_no(c.data_augm),
        c.class_balance.to_string(),
        yes_no(c.contrast_norm),
        yes_no(c.sample_weight),
        format!("{:.3}", r.precision),
        format!("{:.3}", r.recall),
        format!("{:.3}", r.f1),
        format!("{:.3}", r.accuracy),
    ]
}

fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string();
    let mut s = line(header.to_vec());
    s.push('\n');
    for r in rows {
        s.push_str(&line(r.iter().map(String::as_str).collect()));
        s.push('\n');
    }
    s
}

/// Aligned plain-text table: toggles then P, R, F1, Acc per row.
pub fn ablation_table(rows: &[AblationRow]) -> String {
    aligned(&ABLATION_HEADER, &rows.iter().map(ablation_cells).collect::<Vec<_>>())
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = ABLATION_HEADER.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&ablation_cells(r).join(","));
        s.push('\n');
    }
    s
}

/// Mean stage times over a number of runs.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingReport {
    pub device: String,
    pub runs: usize,
    pub mean: StageTimings,
}

/// Averages per-image stage timings.
pub fn timing_report(device: &str, timings: &[StageTimings]) -> TimingReport {
    let n = timings.len().max(1) as f64;
    let sum = |f: fn(&StageTimings) -> f64| timings.iter().map(f).sum::<f64>() / n;
    TimingReport {
        device: device.to_string(),
        runs: timings.len(),
        mean: StageTimings { proposal: sum(|t| t.proposal), preproc: sum(|t| t.preproc), classif: sum(|t| t.classif), overall: sum(|t| t.overall) },
    }
}

const TIMING_HEADER: [&str; 5] = ["Device", "Proposal (s)", "Preproc (s)", "Classif (s)", "Overall (s)"];

impl TimingReport {
    fn cells(&self) -> Vec<String> {
        let m = &self.mean;
        vec![self.device.clone(), format!("{:.2}", m.proposal), format!("{:.2}", m.preproc), format!("{:.2}", m.classif), format!("{:.2}", m.overall)]
    }

    pub fn table(&self) -> String {
        let mut s = aligned(&TIMING_HEADER, &[self.cells()]);
        let _ = writeln!(s, "averaged over {} runs", self.runs);
        s
    }

    pub fn csv(&self) -> String {
        format!("{}\n{}\n", TIMING_HEADER.join(","), self.cells().join(","))
    }
}

/// One `path predicted confidence proposals` line.
pub fn decision_line(path: &Path, label: &str, confidence: f64, proposals: usize) -> String {
    format!("{} {label} {confidence:.6} {proposals}", path.display())
}

/// Human-readable summary of an evaluation.
pub fn summary(result: &EvalResult, class_names: &[String]) -> String {
    let mut s = format!(
        "precision {:.4}\nrecall {:.4}\nf1 {:.4}\naccuracy {:.4}\ntp {}\nfp {}\nfn {}\n",
        result.precision, result.recall, result.f1, result.accuracy, result.tp, result.fp, result.fn_
    );
    let names: Vec<&str> = class_names.iter().map(String::as_str).chain(std::iter::once(NO_LOGO)).collect();
    let mut header = vec!["truth\\pred"];
    header.extend(&names);
    let rows: Vec<Vec<String>> =
        result.confusion.iter().zip(&names).map(|(r, n)| std::iter::once(n.to_string()).chain(r.iter().map(usize::to_string)).collect()).collect();
    s.push_str(&aligned(&header, &rows));
    s
}
