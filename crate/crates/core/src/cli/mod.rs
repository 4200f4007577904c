//! The `logorec` command line. Every subcommand resolves a [`RunConfig`]
//! (defaults, then `--config` file, then flags), echoes it to stderr, and
//! writes its primary output to stdout.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

pub mod config;

pub use config::{apply_config_file, parse_config_text, Precision, RunConfig};

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::datamodel::{is_image, load_dataset, load_rgb, DataError, DatasetIndex, Split};
use crate::dedup::{find_exact_duplicates, find_near_duplicates, image_crop, to_gray, SsimConfig, DUPLICATE_SSIM};
use crate::evalkit::{ablation_csv, ablation_table, decision_line, evaluate_model, run_ablation, summary, timing_report, EvalError, EvalResult};
use crate::inference::{classify_batch, classify_image_timed, InferenceError, StageTimings};
use crate::logonet::{load_model, save_model, Model, ModelError};
use crate::nncore::Scalar;
use crate::proposals::{CachedProposer, Proposer};
use crate::synthbench::{generate, SynthError};
use crate::trainer::{calibrate_threshold, train, Preset, TrainError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(_) | TrainError::BackgroundNeedsProposals => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Train(t) => t.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidSpec(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Options shared by every subcommand.
#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` configuration file; keys are listed under `logorec --help`
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Training preset TC-I .. TC-X; sets the six training toggles [default: TC-VII]
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Seed for training and synthetic data [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-image stages; 0 uses all cores, 1 is fully deterministic [default: 0]
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Network arithmetic: f32 or f64 [default: f32]
    #[arg(long, global = true)]
    precision: Option<String>,
    /// Any configuration setting, overriding the config file; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Do not echo the resolved configuration to stderr
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Parser, Debug)]
#[command(name = "logorec", version, about = "Logo recognition with region proposals and a small CNN")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic logo benchmark in the dataset layout
    Synth {
        /// Output dataset root
        #[arg(long)]
        out: PathBuf,
    },
    /// Print region proposals, one `image_path x y w h score` line per box
    Propose {
        /// Image files or directories (searched recursively)
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Train a model; writes the model file and prints the training report
    Train {
        /// Dataset root
        #[arg(long)]
        data: PathBuf,
        /// Model file to write
        #[arg(long)]
        out: PathBuf,
        /// Also write the training report here
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Re-pick a model's confidence threshold on labelled images
    Calibrate {
        /// Model file to calibrate
        #[arg(long)]
        model: PathBuf,
        /// Dataset root
        #[arg(long)]
        data: PathBuf,
        /// Splits providing calibration images
        #[arg(long, value_delimiter = ',', default_value = "train,val")]
        splits: Vec<Split>,
        /// Write the calibrated model here instead of overwriting the input
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify images, one `path predicted_class confidence n_proposals` line each
    Predict {
        /// Model file
        #[arg(long)]
        model: PathBuf,
        /// Image files or directories (searched recursively)
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Score a model on a dataset split
    Evaluate {
        /// Model file
        #[arg(long)]
        model: PathBuf,
        /// Dataset root
        #[arg(long)]
        data: PathBuf,
        /// Split to evaluate
        #[arg(long, default_value = "test")]
        split: Split,
        /// Also write the metrics as comma-separated values
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train and test-evaluate several presets with a shared seed; prints the table
    Ablate {
        /// Comma-separated presets, in row order
        #[arg(long, value_delimiter = ',', default_value = "TC-I,TC-II,TC-III,TC-IV,TC-V,TC-VI,TC-VII,TC-VIII,TC-IX,TC-X")]
        presets: Vec<Preset>,
        /// Dataset root
        #[arg(long)]
        data: PathBuf,
        /// Also write the table as comma-separated values
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Report exact duplicates (SSIM) and, given a model, near-duplicate candidates (feature k-NN)
    Dedup {
        /// First image set: files or directories
        #[arg(required = true)]
        images: Vec<PathBuf>,
        /// Second image set; without it the first set is compared with itself
        #[arg(long, num_args = 1..)]
        against: Vec<PathBuf>,
        /// Pairs with SSIM strictly above this are duplicates
        #[arg(long, default_value_t = DUPLICATE_SSIM)]
        threshold: f64,
        /// Model whose 64-d features drive the nearest-neighbour search
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Time the pipeline stages (proposal, preproc, classif, overall) on distinct images
    Bench {
        /// Model file
        #[arg(long)]
        model: PathBuf,
        /// Image files or directories (searched recursively)
        #[arg(required = true)]
        images: Vec<PathBuf>,
        /// Number of timed images (at most the number given)
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Device label for the table row
        #[arg(long, default_value = "CPU")]
        device: String,
        /// Also write the table as comma-separated values
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn config_help() -> String {
    let mut s = String::from("Configuration keys (file `key = value` lines or --set KEY=VALUE), with defaults:\n");
    for (k, v) in RunConfig::default().describe() {
        let _ = writeln!(s, "  {k} = {v}");
    }
    s.push_str("\nExit codes: 0 success, 1 usage error, 2 data error.");
    s
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run(args: impl IntoIterator<Item = OsString>, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32 {
    let cmd = Cli::command().after_long_help(config_help());
    let cli = match cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    return 0;
                }
                _ => 1,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Defaults, then the config file, then flags.
fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::default();
    if let Some(path) = &common.config {
        if !path.is_file() {
            return Err(CliError::Usage(format!("config file {} does not exist", path.display())));
        }
        apply_config_file(&mut config, path).map_err(CliError::Usage)?;
    }
    let mut pairs: Vec<(String, String)> = Vec::new();
    if let Some(p) = &common.preset {
        pairs.push(("preset".into(), p.clone()));
    }
    for s in &common.set {
        let (k, v) = s.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {s:?}")))?;
        pairs.push((k.trim().into(), v.trim().into()));
    }
    if let Some(seed) = common.seed {
        pairs.push(("seed".into(), seed.to_string()));
    }
    if let Some(t) = common.threads {
        pairs.push(("threads".into(), t.to_string()));
    }
    if let Some(p) = &common.precision {
        pairs.push(("precision".into(), p.clone()));
    }
    config.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).map_err(CliError::Usage)?;
    config.validate().map_err(CliError::Usage)?;
    Ok(config)
}

fn execute(cli: Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let config = resolve(&cli.common)?;
    if !cli.common.quiet {
        let _ = write!(err, "# resolved configuration\n{}", config.to_text());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", config.threads)))?;
    pool.install(|| match config.precision {
        Precision::F32 => dispatch::<f32>(&cli.command, &config, out, err),
        Precision::F64 => dispatch::<f64>(&cli.command, &config, out, err),
    })
}

/// Expands files and directories (recursively, sorted) into image paths.
pub fn collect_images(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    fn walk(dir: &Path, acc: &mut Vec<PathBuf>) -> Result<(), CliError> {
        let mut entries: Vec<PathBuf> =
            fs::read_dir(dir).map_err(|e| io_error(dir, e))?.map(|e| e.map(|e| e.path()).map_err(|e| io_error(dir, e))).collect::<Result<_, _>>()?;
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(&p, acc)?;
            } else if is_image(&p) {
                acc.push(p);
            }
        }
        Ok(())
    }
    let mut acc = Vec::new();
    for p in paths {
        if p.is_dir() {
            walk(p, &mut acc)?;
        } else if p.is_file() {
            acc.push(p.clone());
        } else {
            return Err(CliError::Data(format!("{}: no such file or directory", p.display())));
        }
    }
    Ok(acc)
}

fn load_data(root: &Path) -> Result<DatasetIndex, CliError> {
    Ok(load_dataset(root)?.0)
}

fn check_classes<T>(model: &Model<T>, dataset: &DatasetIndex) -> Result<(), CliError> {
    if model.class_names != dataset.classes {
        return Err(CliError::Data(format!(
            "model classes [{}] differ from dataset classes [{}]",
            model.class_names.join(", "),
            dataset.classes.join(", ")
        )));
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn metrics_csv(r: &EvalResult) -> String {
    format!("precision,recall,f1,accuracy,tp,fp,fn\n{},{},{},{},{},{},{}\n", r.precision, r.recall, r.f1, r.accuracy, r.tp, r.fp, r.fn_)
}

fn emit(out: &mut (dyn Write + Send), text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::Data(format!("cannot write output: {e}")))
}

fn dispatch<T: Scalar>(command: &Command, config: &RunConfig, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let proposer = CachedProposer::new(config.proposals.clone());
    match command {
        Command::Synth { out: root } => {
            let index = generate(&config.synth, root)?;
            let mut s = format!("classes {}\n", index.classes.join(","));
            for split in Split::ALL {
                let recs = index.split(split);
                let logos = recs.iter().filter(|r| r.label.is_some()).count();
                let _ = writeln!(s, "{split} {} images ({logos} logo, {} no-logo)", recs.len(), recs.len() - logos);
            }
            emit(out, &s)
        }
        Command::Propose { images } => {
            let paths = collect_images(images)?;
            let lines: Vec<String> = paths
                .par_iter()
                .map(|p| -> Result<String, CliError> {
                    let image = load_rgb(p)?;
                    let mut s = String::new();
                    for b in config.proposals.propose(&image).boxes() {
                        let _ = writeln!(s, "{} {} {:.6}", p.display(), b.bbox, b.score);
                    }
                    Ok(s)
                })
                .collect::<Result<_, _>>()?;
            emit(out, &lines.concat())
        }
        Command::Train { data, out: model_path, report } => {
            let dataset = load_data(data)?;
            let (model, rep) = train::<T>(&config.training, &dataset, &proposer)?;
            save_model(&model, model_path)?;
            let text = rep.to_text(&model.class_names);
            if let Some(path) = report {
                write_file(path, &text)?;
            }
            emit(out, &text)
        }
        Command::Calibrate { model: path, data, splits, out: dest } => {
            let mut model = load_model::<T>(path)?;
            let dataset = load_data(data)?;
            check_classes(&model, &dataset)?;
            let images = dataset.images(splits);
            let calib = calibrate_threshold(&model, &images, &proposer)?;
            model.threshold = calib.threshold;
            save_model(&model, dest.as_deref().unwrap_or(path))?;
            emit(out, &format!("threshold {}\naccuracy {:.4}\nimages {}\n", calib.threshold, calib.accuracy, images.len()))
        }
        Command::Predict { model, images } => {
            let model = load_model::<T>(model)?;
            let paths = collect_images(images)?;
            let mut failed = 0;
            let mut s = String::new();
            for entry in classify_batch(&paths, &model, &proposer) {
                match entry.result {
                    Ok((d, _)) => {
                        let _ = writeln!(s, "{}", decision_line(&entry.path, d.label(&model.class_names), d.confidence, d.proposal_count));
                    }
                    Err(e) => {
                        failed += 1;
                        let _ = writeln!(err, "error: {}: {e}", entry.path.display());
                    }
                }
            }
            emit(out, &s)?;
            if failed > 0 {
                return Err(CliError::Data(format!("{failed} of {} images could not be classified", paths.len())));
            }
            Ok(())
        }
        Command::Evaluate { model, data, split, csv } => {
            let model = load_model::<T>(model)?;
            let dataset = load_data(data)?;
            check_classes(&model, &dataset)?;
            let result = evaluate_model(&model, dataset.split(*split), &proposer)?;
            if let Some(path) = csv {
                write_file(path, &metrics_csv(&result))?;
            }
            emit(out, &format!("images {}\n{}", dataset.split(*split).len(), summary(&result, &model.class_names)))
        }
        Command::Ablate { presets, data, csv } => {
            let dataset = load_data(data)?;
            let configs: Vec<(String, _)> = presets
                .iter()
                .map(|&p| {
                    let mut c = config.training.clone();
                    c.apply_preset(p);
                    (p.name().to_string(), c)
                })
                .collect();
            let started = Instant::now();
            let rows = run_ablation::<T>(&configs, &dataset, &proposer, |row, _| {
                let r = &row.result;
                let _ = writeln!(err, "{}: F1 {:.3} accuracy {:.3} ({:.0} s)", row.id, r.f1, r.accuracy, started.elapsed().as_secs_f64());
            })?;
            if let Some(path) = csv {
                write_file(path, &ablation_csv(&rows))?;
            }
            emit(out, &ablation_table(&rows))
        }
        Command::Dedup { images, against, threshold, model } => {
            let a = collect_images(images)?;
            let b = if against.is_empty() { None } else { Some(collect_images(against)?) };
            let cfg = SsimConfig::default();
            let gray = |paths: &[PathBuf]| -> Result<Vec<_>, CliError> { paths.par_iter().map(|p| Ok(to_gray(&load_rgb(p)?, &cfg))).collect() };
            let ga = gray(&a)?;
            let gb = b.as_deref().map(gray).transpose()?;
            let other = b.as_ref().unwrap_or(&a);
            let mut s = format!("# exact duplicates: path_a path_b ssim (ssim > {threshold})\n");
            for (i, j, v) in find_exact_duplicates(&ga, gb.as_deref(), *threshold, &cfg) {
                let _ = writeln!(s, "{} {} {v:.6}", a[i].display(), other[j].display());
            }
            if let Some(path) = model {
                let model = load_model::<T>(path)?;
                let crops = |paths: &[PathBuf]| -> Result<Vec<_>, CliError> {
                    paths.par_iter().map(|p| Ok(image_crop(&load_rgb(p)?, &model)?)).collect()
                };
                let ca = crops(&a)?;
                let cb = b.as_deref().map(crops).transpose()?;
                let lists = find_near_duplicates(&model, &ca, cb.as_deref()).map_err(|e| CliError::Data(e.to_string()))?;
                s.push_str("# near-duplicate candidates: query neighbor rank distance\n");
                for list in lists {
                    for (rank, (j, d)) in list.neighbors.iter().enumerate() {
                        let _ = writeln!(s, "{} {} {} {d:.6}", a[list.query].display(), other[*j].display(), rank + 1);
                    }
                }
            }
            emit(out, &s)
        }
        Command::Bench { model, images, runs, device, csv } => {
            let model = load_model::<T>(model)?;
            let paths = collect_images(images)?;
            let paths = &paths[..paths.len().min(*runs)];
            if paths.is_empty() {
                return Err(CliError::Data("no images to time".into()));
            }
            // sequential and uncached, so each stage time is one image's cost
            let mut timings: Vec<StageTimings> = Vec::with_capacity(paths.len());
            for p in paths {
                let start = Instant::now();
                let image = load_rgb(p)?;
                let (_, mut t) = classify_image_timed(&image, &model, &config.proposals)?;
                t.overall = start.elapsed().as_secs_f64();
                timings.push(t);
            }
            let report = timing_report(device, &timings);
            if let Some(path) = csv {
                write_file(path, &report.csv())?;
            }
            emit(out, &report.table())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("logorec").chain(args.iter().copied()).map(OsString::from), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_preset_is_a_usage_error_listing_presets() {
        let (code, _, err) = run_args(&["train", "--preset", "TC-XII", "--data", "x", "--out", "m.bin"]);
        assert_eq!(code, 1);
        assert!(err.contains("TC-I, TC-II"), "{err}");
    }

    #[test]
    fn help_exits_zero_and_lists_defaults() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("max_background_per_image = "));
        let (code, out, _) = run_args(&["bench", "--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("[default: 100]") && out.contains("--threads"));
    }

    #[test]
    fn missing_data_is_exit_two() {
        let (code, _, err) = run_args(&["-q", "evaluate", "--model", "/nonexistent/m.bin", "--data", "/nonexistent"]);
        assert_eq!(code, 2);
        assert!(err.contains("/nonexistent"), "{err}");
    }

    #[test]
    fn bad_flags_and_settings_are_usage_errors() {
        assert_eq!(run_args(&["train", "--bogus"]).0, 1);
        assert_eq!(run_args(&["-q", "--set", "nope=1", "synth", "--out", "/tmp/x"]).0, 1);
        assert_eq!(run_args(&["-q", "--precision", "f16", "synth", "--out", "/tmp/x"]).0, 1);
    }

    #[test]
    fn config_file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        fs::write(&file, "preset = TC-III\nepochs = 3\nseed = 5\n").unwrap();
        let cli = Cli::try_parse_from(["logorec", "--config", file.to_str().unwrap(), "--seed", "8", "--set", "epochs=4", "synth", "--out", "o"]).unwrap();
        let c = resolve(&cli.common).unwrap();
        assert_eq!(c.training.preset(), Some(Preset::III));
        assert_eq!((c.training.hyper.epochs, c.training.hyper.seed, c.synth.seed), (4, 8, 8));
        fs::write(&file, "epoch = 3\n").unwrap();
        let cli = Cli::try_parse_from(["logorec", "--config", file.to_str().unwrap(), "synth", "--out", "o"]).unwrap();
        assert!(matches!(resolve(&cli.common), Err(CliError::Usage(m)) if m.contains("epoch")));
    }
}
