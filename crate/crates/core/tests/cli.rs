use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use vispro::pipeline::svg::parse_series;

const CONFIG: &str = "\
# small model for tests
width_divisor = 8
epochs = 4
batch_size = 8
learning_rate = 1e-3
restarts = 2
max_iters = 400
";

fn vispro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vispro")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = vispro(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs every command once into `<dir>/out` and returns `dir`.
fn run_all(dir: &Path) {
    std::fs::write(dir.join("cfg.txt"), CONFIG).unwrap();
    let m = dir.join("manifest.txt");
    let (cfg, out) = (dir.join("cfg.txt"), dir.join("out"));
    ok(&["generate", "--out", s(dir), "--seed", "3", "--lifetime", "400"]);
    let common = ["--manifest", s(&m), "--config", s(&cfg), "--out", s(&out)];
    for cmd in ["preprocess", "train"] {
        ok(&[&[cmd][..], &common].concat());
    }
    for mode in ["full", "phase1-only", "se-baseline"] {
        ok(&[&["predict"][..], &common, &["--mode", mode]].concat());
    }
    ok(&[&["evaluate"][..], &common].concat());
}

fn pipeline_dir() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let d = scratch("pipeline");
        run_all(&d);
        d
    })
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn every_command_is_byte_identical_on_rerun() {
    let first = pipeline_dir();
    let second = scratch("rerun");
    run_all(&second);
    let (a, b) = (files(first), files(&second));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        if k.file_name().is_some_and(|n| n == "manifest.txt") {
            continue;
        }
        assert!(v == &b[k], "{} differs", k.display());
    }
}

#[test]
fn preprocess_writes_one_image_per_snapshot() {
    let out = pipeline_dir().join("out");
    let (_, rows) = csv(&out.join("preprocess_summary.csv"));
    assert_eq!(rows.len(), 4);
    for r in rows {
        let n: usize = r[3].parse().unwrap();
        assert_eq!(std::fs::read_dir(out.join("tfa").join(&r[0])).unwrap().count(), n);
        assert_eq!(std::fs::read_dir(out.join("spectrogram").join(&r[0])).unwrap().count(), n);
    }
}

#[test]
fn training_reduces_loss() {
    let (_, rows) = csv(&pipeline_dir().join("out/models/cond1_loss.csv"));
    let first: f64 = rows[0][1].parse().unwrap();
    let last: f64 = rows.last().unwrap()[1].parse().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn full_prediction_widens_beyond_truncation() {
    let dir = pipeline_dir().join("out/predict/full/1_3");
    let (rh, rr) = csv(&dir.join("record.csv"));
    let t_c: f64 = rr[0][rh.iter().position(|h| h == "t_c").unwrap()].parse().unwrap();
    let (h, rows) = csv(&dir.join("posterior.csv"));
    assert_eq!(h[..3], ["t", "mean", "sd"]);
    assert!(h.contains(&"lower90".to_string()) && h.contains(&"upper95".to_string()));
    let width = |t_target: f64| {
        let row = rows
            .iter()
            .min_by(|a, b| {
                let da = (a[0].parse::<f64>().unwrap() - t_target).abs();
                let db = (b[0].parse::<f64>().unwrap() - t_target).abs();
                da.total_cmp(&db)
            })
            .unwrap();
        let lo: f64 = row[h.iter().position(|c| c == "lower90").unwrap()].parse().unwrap();
        let hi: f64 = row[h.iter().position(|c| c == "upper90").unwrap()].parse().unwrap();
        hi - lo
    };
    let horizon = 0.5 * t_c;
    assert!(width(0.5 * t_c) < width(t_c + horizon / 2.0));
    assert!(dir.join("model.gpr").exists());
}

#[test]
fn phase1_only_has_no_interval_columns() {
    let dir = pipeline_dir().join("out/predict/phase1-only/1_3");
    let (h, _) = csv(&dir.join("record.csv"));
    assert!(!h.iter().any(|c| c.starts_with("lower") || c.starts_with("upper")));
    assert!(!dir.join("posterior.csv").exists());
    let svg = std::fs::read_to_string(dir.join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 1);
}

// Minimal well-formedness check: balanced, properly nested tags.
fn assert_balanced_xml(text: &str) {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(i) = rest.find('<') {
        rest = &rest[i..];
        if rest.starts_with("<!--") {
            rest = &rest[rest.find("-->").expect("closed comment") + 3..];
            continue;
        }
        let end = rest.find('>').expect("closed tag");
        let tag = &rest[1..end];
        rest = &rest[end + 1..];
        if tag.starts_with('?') || tag.ends_with('/') {
            continue;
        }
        let name = tag.trim_start_matches('/').split_whitespace().next().unwrap().to_string();
        if tag.starts_with('/') {
            assert_eq!(stack.pop().as_deref(), Some(name.as_str()));
        } else {
            stack.push(name);
        }
    }
    assert!(stack.is_empty(), "unclosed {stack:?}");
}

#[test]
fn plot_has_one_polyline_per_series() {
    let svg = std::fs::read_to_string(pipeline_dir().join("out/predict/full/1_4/plot.svg")).unwrap();
    assert_balanced_xml(&svg);
    let series = parse_series(&svg);
    // phase1, mean and a lower/upper pair per level
    assert_eq!(series.len(), 2 + 2 * 3);
    assert_eq!(svg.matches("<polyline").count(), series.len());
    assert_eq!(series[0].0, "phase1");
}

#[test]
fn evaluate_compares_all_modes() {
    let out = pipeline_dir().join("out/evaluate");
    let (h, rows) = csv(&out.join("comparison.csv"));
    assert_eq!(h, ["mode", "n", "score", "mean_er", "std_er", "mean_abs_er", "invalid90"]);
    let modes: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(modes, ["full", "phase1-only", "se-baseline"]);
    assert!(rows[1][6].is_empty());
    let (ch, crow) = csv(&out.join("full_coverage.csv"));
    assert_eq!(ch, ["level", "count", "mean_width", "invalid"]);
    let inv: Vec<usize> = crow.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(inv.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn evaluate_table4_fixture() {
    let dir = scratch("table4");
    let fixture = dir.join("er.csv");
    let mut text = String::from("bearing,Er\n");
    for (b, e) in ["1_3", "1_4", "1_5", "1_6", "1_7", "2_3", "2_4", "2_5", "2_6", "2_7", "3_3"]
        .iter()
        .zip([1.75, 2.94, 4.35, 4.11, -1.06, 4.91, 7.91, 6.47, -2.33, 5.17, -1.22])
    {
        text.push_str(&format!("{b},{e}\n"));
    }
    std::fs::write(&fixture, text).unwrap();
    let stdout = ok(&["evaluate", "--records", s(&fixture), "--out", s(&dir.join("out"))]);
    assert!(stdout.contains("Score=0.84"), "{stdout}");
    assert!(stdout.contains("Mean=3.00"), "{stdout}");
    assert!(stdout.contains("STD=3.18"), "{stdout}");
}

#[test]
fn evaluate_perfect_predictions() {
    let dir = scratch("perfect");
    let fixture = dir.join("r.csv");
    std::fs::write(
        &fixture,
        "bearing,t_c,y,y_hat,lower90,upper90\n1_3,18010,5730,5730,5420,5860\n1_4,11380,339,339,320,340\n",
    )
    .unwrap();
    let out = dir.join("out");
    ok(&["evaluate", "--records", s(&fixture), "--out", s(&out), "--levels", "90"]);
    let (h, rows) = csv(&out.join("evaluate/records_table.csv"));
    let score_row = rows.iter().find(|r| r[0] == "Score").unwrap();
    let a = h.iter().position(|c| c == "A").unwrap();
    assert_eq!(score_row[a], "1.000000");
    let (_, cov) = csv(&out.join("evaluate/records_coverage.csv"));
    assert_eq!(cov[0][3], "0");
}

#[test]
fn empty_manifest_preprocesses_nothing() {
    let dir = scratch("empty");
    std::fs::write(dir.join("m.txt"), "root = data\n").unwrap();
    let stdout = ok(&["preprocess", "--manifest", s(&dir.join("m.txt")), "--out", s(&dir.join("out"))]);
    assert!(stdout.starts_with("preprocessed 0 bearings"));
    let (_, rows) = csv(&dir.join("out/preprocess_summary.csv"));
    assert!(rows.is_empty());
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = scratch("errors");
    assert_eq!(vispro(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(vispro(&["--help"]).status.code(), Some(0));
    assert_eq!(vispro(&["train", "--manifest", s(&dir.join("nope.txt"))]).status.code(), Some(1));
    assert_eq!(vispro(&["predict", "--mode", "sideways"]).status.code(), Some(1));

    std::fs::write(dir.join("m.txt"), "root = data\ntrain.1 = 1_1\n").unwrap();
    let out = vispro(&["train", "--manifest", s(&dir.join("m.txt")), "--out", s(&dir.join("out"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("preprocess"));

    std::fs::create_dir_all(dir.join("data/Bearing1_1")).unwrap();
    std::fs::write(dir.join("data/Bearing1_1/acc_00001.csv"), "9,0,0,0,abc,1.0\n").unwrap();
    let out = vispro(&["preprocess", "--manifest", s(&dir.join("m.txt")), "--out", s(&dir.join("out"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("acc_00001.csv"));
}
