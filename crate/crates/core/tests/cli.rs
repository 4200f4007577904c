//! End-to-end runs of the command-line front end on a tiny synthetic dataset.

use std::fs;
use std::path::{Path, PathBuf};

use tempfile::TempDir;

const TINY: [&str; 10] = [
    "--quiet",
    "--set",
    "num_classes=2",
    "--set",
    "per_class=3,2,3",
    "--set",
    "no_logo=0,2,3",
    "--set",
    "epochs=1",
    "--seed",
];

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("logorec").chain(args.iter().copied()).map(Into::into);
    let code = logorec::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{args:?} failed: {err}");
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn data(&self) -> PathBuf {
        self.dir.path().join("data")
    }

    fn model(&self) -> PathBuf {
        self.dir.path().join("model.lrm")
    }

    fn test_dir(&self) -> PathBuf {
        self.data().join("test")
    }
}

fn tiny(seed: &str) -> Vec<&str> {
    let mut v = TINY.to_vec();
    v.push(seed);
    v
}

/// Generates the tiny dataset and, with `train`, a one-epoch model.
fn fixture(train: bool) -> Fixture {
    let f = Fixture { dir: tempfile::tempdir().unwrap() };
    let data = f.data();
    ok(&[tiny("3").as_slice(), &["synth", "--out", s(&data)]].concat());
    if train {
        let model = f.model();
        ok(&[tiny("3").as_slice(), &["train", "--data", s(&data), "--out", s(&model)]].concat());
    }
    f
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn images_under(dir: &Path) -> Vec<PathBuf> {
    walk(dir).into_iter().filter(|p| p.extension().is_some_and(|x| x == "png")).collect()
}

#[test]
fn synth_is_reproducible_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    ok(&[tiny("5").as_slice(), &["synth", "--out", s(&a)]].concat());
    ok(&[tiny("5").as_slice(), &["synth", "--out", s(&b)]].concat());
    ok(&[tiny("6").as_slice(), &["synth", "--out", s(&c)]].concat());
    let (ia, ib, ic) = (images_under(&a), images_under(&b), images_under(&c));
    assert_eq!(ia.len(), 2 * (3 + 2 + 3) + 2 + 3);
    assert_eq!(ia.len(), ib.len());
    for (x, y) in ia.iter().zip(&ib) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{} differs between identical runs", x.display());
    }
    assert!(ia.iter().zip(&ic).any(|(x, y)| fs::read(x).unwrap() != fs::read(y).unwrap()));
    // one annotation sidecar per logo image
    let sidecars = walk(&a).into_iter().filter(|p| p.to_string_lossy().ends_with(".bboxes.txt")).count();
    assert_eq!(sidecars, 2 * (3 + 2 + 3));
}

#[test]
fn propose_prints_in_bounds_boxes() {
    let f = fixture(false);
    let img = &images_under(&f.test_dir())[0];
    let out = ok(&["--quiet", "propose", s(img)]);
    let lines: Vec<&str> = out.lines().collect();
    assert!(!lines.is_empty());
    for l in lines {
        let parts: Vec<&str> = l.split_whitespace().collect();
        assert_eq!(parts.len(), 6, "{l}");
        assert_eq!(parts[0], s(img));
        let v: Vec<f64> = parts[1..].iter().map(|p| p.parse().unwrap()).collect();
        assert!(v[0] >= 0.0 && v[1] >= 0.0 && v[2] >= 1.0 && v[3] >= 1.0);
        assert!(v[0] + v[2] <= 128.0 && v[1] + v[3] <= 128.0, "{l}");
    }
}

#[test]
fn train_predict_evaluate_calibrate() {
    let f = fixture(true);
    let model = f.model();
    assert!(fs::read(&model).unwrap().starts_with(b"LOGOREC-MODEL"));

    let images = images_under(&f.test_dir());
    let out = ok(&["--quiet", "predict", "--model", s(&model), s(&f.test_dir())]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), images.len());
    let classes = fs::read_dir(f.data().join("train")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect::<Vec<_>>();
    for (l, img) in lines.iter().zip(&images) {
        let parts: Vec<&str> = l.split_whitespace().collect();
        assert_eq!(parts.len(), 4, "{l}");
        assert_eq!(parts[0], s(img));
        assert!(parts[1] == "NO-LOGO" || classes.iter().any(|c| c == parts[1]), "{l}");
        let conf: f64 = parts[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&conf));
        assert!(parts[3].parse::<usize>().unwrap() > 0);
    }

    let csv = f.dir.path().join("metrics.csv");
    let out = ok(&["--quiet", "evaluate", "--model", s(&model), "--data", s(&f.data()), "--csv", s(&csv)]);
    for key in ["precision", "recall", "f1", "accuracy"] {
        assert!(out.lines().any(|l| l.starts_with(key)), "missing {key} in {out}");
    }
    assert!(fs::read_to_string(&csv).unwrap().lines().count() >= 2);

    let recal = f.dir.path().join("recal.lrm");
    ok(&["--quiet", "calibrate", "--model", s(&model), "--data", s(&f.data()), "--splits", "val", "--out", s(&recal)]);
    let header = fs::read(&recal).unwrap();
    let text = String::from_utf8_lossy(&header[..200.min(header.len())]).into_owned();
    assert!(text.contains("threshold"), "{text}");
}

#[test]
fn predict_reports_unreadable_images_but_continues() {
    let f = fixture(true);
    let bad = f.dir.path().join("broken.png");
    fs::write(&bad, b"not an image").unwrap();
    let good = &images_under(&f.test_dir())[0];
    let (code, out, err) = run(&["--quiet", "predict", "--model", s(&f.model()), s(good), s(&bad)]);
    assert_eq!(code, 2);
    assert_eq!(out.lines().count(), 1);
    assert!(err.contains("broken.png"), "{err}");
}

#[test]
fn ablate_prints_one_row_per_preset() {
    let f = fixture(false);
    let csv = f.dir.path().join("ablation.csv");
    let out = ok(&[tiny("3").as_slice(), &["ablate", "--presets", "TC-I,TC-III", "--data", s(&f.data()), "--csv", s(&csv)]].concat());
    assert!(out.contains("TC-I") && out.contains("TC-III"), "{out}");
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 3);
}

#[test]
fn dedup_finds_copies_and_neighbours() {
    let f = fixture(true);
    let imgs = images_under(&f.test_dir());
    let copy = f.dir.path().join("copy.png");
    fs::copy(&imgs[0], &copy).unwrap();
    let model = f.model();
    let mut args = vec!["--quiet", "dedup", "--model", s(&model)];
    let names: Vec<String> = imgs.iter().map(|p| p.display().to_string()).collect();
    args.extend(names.iter().map(String::as_str));
    args.push(s(&copy));
    let out = ok(&args);
    let exact: Vec<&str> = out.lines().skip_while(|l| !l.starts_with("# exact")).skip(1).take_while(|l| !l.starts_with('#')).collect();
    assert!(exact.iter().any(|l| l.starts_with(&format!("{} {}", names[0], copy.display()))), "{out}");
    let near: Vec<&str> = out.lines().skip_while(|l| !l.starts_with("# near")).skip(1).collect();
    assert_eq!(near.len(), (imgs.len() + 1) * 5);
    // the copy is its original's nearest neighbour, at distance zero
    let first = near.iter().find(|l| l.starts_with(&format!("{} ", copy.display()))).unwrap();
    let parts: Vec<&str> = first.split_whitespace().collect();
    assert_eq!((parts[1], parts[2]), (names[0].as_str(), "1"));
    assert_eq!(parts[3].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn bench_prints_the_timing_table() {
    let f = fixture(true);
    let out = ok(&["--quiet", "bench", "--model", s(&f.model()), "--runs", "3", s(&f.test_dir())]);
    let mut lines = out.lines();
    let header = lines.next().unwrap();
    for col in ["Device", "Proposal (s)", "Preproc (s)", "Classif (s)", "Overall (s)"] {
        assert!(header.contains(col), "{header}");
    }
    assert!(lines.next().unwrap().starts_with("CPU"));
    assert!(out.contains("averaged over 3 runs"));
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.lrm");
    let img = dir.path().join("x.png");
    image::RgbImage::new(40, 40).save(&img).unwrap();
    assert_eq!(run(&["--quiet", "predict", "--model", s(&missing), s(&img)]).0, 2);
    assert_eq!(run(&["--quiet", "--set", "bogus=1", "predict", "--model", s(&missing), s(&img)]).0, 1);
    assert_eq!(run(&["--quiet", "--precision", "f16", "predict", "--model", s(&missing), s(&img)]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
    let garbage = dir.path().join("garbage.lrm");
    fs::write(&garbage, b"hello\n").unwrap();
    let (code, _, err) = run(&["--quiet", "predict", "--model", s(&garbage), s(&img)]);
    assert_eq!(code, 2);
    assert!(err.contains("bad magic"), "{err}");
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# tiny\nnum_classes = 2\nper_class = 1,1,1\nno_logo = 0,0,1\nepochs = 4\n").unwrap();
    let out = dir.path().join("d");
    let (code, _, err) = run(&["--config", s(&conf), "--set", "epochs=2", "synth", "--out", s(&out)]);
    assert_eq!(code, 0, "{err}");
    // the resolved configuration is echoed, flags winning over the file
    assert!(err.lines().any(|l| l.trim() == "epochs = 2"), "{err}");
    assert!(err.lines().any(|l| l.trim() == "num_classes = 2"), "{err}");
    assert_eq!(images_under(&out).len(), 2 * 3 + 1);
}
