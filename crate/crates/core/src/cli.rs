//! Command-line front end. Every command writes its outputs under `--out`
//! and is deterministic given the same inputs, config and seed.
//!
//! ```text
//! out/
//!   preprocess_summary.csv
//!   tfa/<bearing>/snap_NNNNN.vtfa
//!   spectrogram/<bearing>/snap_NNNNN.csv
//!   models/cond<c>.vspr, models/cond<c>_loss.csv
//!   predict/<mode>/<bearing>/{phase1,posterior,record}.csv, model.gpr, plot.svg
//!   evaluate/<mode>_table.csv, <mode>_coverage.csv, comparison.csv
//! ```

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataio::{
    generate_synthetic, load_bearing, save_gpr, save_model, write_bearing, BearingRole, DatasetManifest,
    Phm12Columns,
};
use crate::error::{Error, Result};
use crate::nsgpr::ConfidenceLevel;
use crate::par::Execution;
use crate::pipeline::suite::{test_spec, train_spec, truncate_seeded, SuiteConfig};
use crate::pipeline::svg::{render, Series};
use crate::pipeline::{
    label_images, predict_from_trajectory, train_condition, trajectory_from_images, BearingPrediction, Mode,
    PipelineConfig, PredictionRecord, Table,
};
use crate::scoring::{
    accuracy_score, aggregate_errors, coverage_csv, coverage_report, fmt6, results_table_csv, BearingResult, Score,
};
use crate::tfa::{read_vtfa, stft_batch, write_vtfa, TfaImage};

#[derive(Debug, Parser)]
#[command(name = "vispro", version, about = "Two-phase bearing remaining-useful-life prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// Dataset manifest (key=value).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Pipeline config (key=value, '#' comments).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// full, phase1-only or se-baseline.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Confidence levels, e.g. 80,90,95.
    #[arg(long)]
    pub levels: Option<String>,
    /// Extrapolation beyond truncation, seconds (default 0.5·t_c).
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic PHM12-style dataset and its manifest.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Training (run-to-failure) bearings.
        #[arg(long, default_value_t = 2)]
        train: usize,
        /// Testing (truncated) bearings.
        #[arg(long, default_value_t = 2)]
        test: usize,
        /// Testing-bearing lifetime, seconds; training lifetimes spread over ±20%.
        #[arg(long, default_value_t = 2000.0)]
        lifetime: f64,
    },
    /// Spectrogram images for every bearing in the manifest.
    Preprocess(Common),
    /// Train one Pro-SQN per operating condition.
    Train(Common),
    /// Phase-I trajectory and Phase-II prediction for testing bearings.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Testing bearing id; all testing bearings when omitted.
        #[arg(long)]
        bearing: Option<String>,
    },
    /// Score predictions against ground truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Score a results file (bearing,t_c,y,y_hat[,lowerNN,upperNN] or bearing,Er) instead of predictions.
        #[arg(long)]
        records: Option<PathBuf>,
    },
}

/// Parses arguments and runs a command, writing a short report to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn std::io::Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            let _ = write!(stdout, "{e}");
            Error::Config(String::new())
        }
        _ => Error::Config(e.to_string()),
    });
    let cli = match cli {
        Ok(c) => c,
        Err(Error::Config(msg)) if msg.is_empty() => return Ok(()),
        Err(e) => return Err(e),
    };
    let report = match cli.command {
        Command::Generate {
            out,
            seed,
            train,
            test,
            lifetime,
        } => cmd_generate(&out, seed, train, test, lifetime)?,
        Command::Preprocess(c) => {
            let (cfg, m) = setup(&c)?;
            cmd_preprocess(&cfg, &m)?
        }
        Command::Train(c) => {
            let (cfg, m) = setup(&c)?;
            cmd_train(&cfg, &m)?
        }
        Command::Predict { common, bearing } => {
            let (cfg, m) = setup(&common)?;
            cmd_predict(&cfg, &m, bearing.as_deref())?
        }
        Command::Evaluate { common, records } => {
            let cfg = config(&common)?;
            match records {
                Some(path) => cmd_evaluate_records(&cfg, &path)?,
                None => {
                    let path = cfg
                        .manifest
                        .clone()
                        .ok_or_else(|| Error::Config("evaluate needs --manifest or --records".into()))?;
                    cmd_evaluate(&cfg, &DatasetManifest::read(&path)?, common.mode.is_some())?
                }
            }
        }
    };
    stdout.write_all(report.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(m) = &c.manifest {
        cfg.manifest = Some(m.clone());
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.set_seed(s);
    }
    if let Some(m) = c.mode {
        cfg.mode = m;
    }
    if let Some(l) = &c.levels {
        cfg.levels = ConfidenceLevel::parse_list(l).map_err(|e| Error::Config(e.to_string()))?;
    }
    if let Some(h) = c.horizon {
        cfg.horizon = Some(h);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn setup(c: &Common) -> Result<(PipelineConfig, DatasetManifest)> {
    let cfg = config(c)?;
    let path = cfg
        .manifest
        .clone()
        .ok_or_else(|| Error::Config("--manifest is required (or manifest= in --config)".into()))?;
    let manifest = DatasetManifest::read(&path)?;
    Ok((cfg, manifest))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn cmd_generate(out: &Path, seed: u64, n_train: usize, n_test: usize, lifetime: f64) -> Result<String> {
    let exec = Execution::default();
    let suite = SuiteConfig {
        test_lifetime: lifetime,
        train_lifetimes: (0..n_train)
            .map(|k| {
                let spread = if n_train > 1 { k as f64 / (n_train - 1) as f64 } else { 0.5 };
                let raw = lifetime * (0.8 + 0.4 * spread);
                (raw / 10.0).round() * 10.0
            })
            .collect(),
        train_seed_base: seed.wrapping_mul(1000).wrapping_add(500),
        ..SuiteConfig::default()
    };
    let data = out.join("data");
    let mut manifest = DatasetManifest::empty(&data);
    let mut report = String::new();
    for k in 0..n_train {
        let mut spec = train_spec(&suite, k);
        spec.id = format!("1_{}", k + 1);
        let run = generate_synthetic(&spec, exec)?;
        write_bearing(&data, &run)?;
        manifest.train.entry(1).or_default().push(spec.id.clone());
        let _ = writeln!(report, "train {} snapshots={} t_f={}", spec.id, run.snapshots.len(), run.end_time());
    }
    for k in 0..n_test {
        let test_seed = seed.wrapping_mul(1000).wrapping_add(k as u64);
        let mut spec = test_spec(&suite, test_seed);
        spec.id = format!("1_{}", n_train + k + 1);
        let run = generate_synthetic(&spec, exec)?;
        let (truncated, y) = truncate_seeded(&run, test_seed, suite.truncation)?;
        write_bearing(&data, &truncated)?;
        manifest.test.entry(1).or_default().push(spec.id.clone());
        manifest.truth.insert(spec.id.clone(), y);
        let _ = writeln!(
            report,
            "test {} snapshots={} t_c={} y={y}",
            spec.id,
            truncated.snapshots.len(),
            truncated.end_time()
        );
    }
    write(&out.join("manifest.txt"), manifest.to_text("data"))?;
    let _ = writeln!(report, "manifest {}", out.join("manifest.txt").display());
    Ok(report)
}

fn tfa_dir(cfg: &PipelineConfig, id: &str) -> PathBuf {
    cfg.out.join("tfa").join(id)
}

fn spectrogram_csv(img: &TfaImage) -> String {
    let mut s = String::from("freq_hz");
    for t in &img.window_times {
        let _ = write!(s, ",{}", fmt6(*t));
    }
    s.push('\n');
    for r in 0..img.n_rows {
        let _ = write!(s, "{}", fmt6(r as f64 * img.band_width_hz));
        for c in 0..img.n_cols {
            let _ = write!(s, ",{}", fmt6(img.get(r, c) as f64));
        }
        s.push('\n');
    }
    s
}

fn cmd_preprocess(cfg: &PipelineConfig, manifest: &DatasetManifest) -> Result<String> {
    let exec = Execution::default();
    let mut summary = String::from("bearing,condition,role,snapshots,t_end\n");
    let bearings = manifest.bearings();
    for (cond, role, id) in &bearings {
        let run = load_bearing(manifest, id, &Phm12Columns, exec)?;
        let images = stft_batch(&run.snapshots, &cfg.stft, exec)
            .map_err(|e| Error::Ingestion(format!("bearing {id}: {e}")))?;
        let dir = tfa_dir(cfg, id);
        let spec_dir = cfg.out.join("spectrogram").join(id);
        for d in [&dir, &spec_dir] {
            if d.exists() {
                std::fs::remove_dir_all(d).map_err(|e| Error::io(d, e))?;
            }
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        for (i, img) in images.iter().enumerate() {
            write_vtfa(&dir.join(format!("snap_{i:05}.vtfa")), img)?;
            write(&spec_dir.join(format!("snap_{i:05}.csv")), spectrogram_csv(img))?;
        }
        let _ = writeln!(summary, "{id},{cond},{role},{},{}", images.len(), fmt6(run.end_time()));
    }
    write(&cfg.out.join("preprocess_summary.csv"), &summary)?;
    Ok(format!("preprocessed {} bearings\n{summary}", bearings.len()))
}

struct Preprocessed {
    condition: u8,
    role: BearingRole,
    t_end: f64,
}

fn read_summary(cfg: &PipelineConfig) -> Result<BTreeMap<String, Preprocessed>> {
    let path = cfg.out.join("preprocess_summary.csv");
    let text = std::fs::read_to_string(&path).map_err(|_| {
        Error::Config(format!(
            "{} not found; run `vispro preprocess` with the same --out first",
            path.display()
        ))
    })?;
    let table = Table::parse(&text, &path)?;
    let mut out = BTreeMap::new();
    for row in table.rows() {
        let role = match table.text(row, "role")? {
            "train" => BearingRole::Train,
            _ => BearingRole::Test,
        };
        out.insert(
            table.text(row, "bearing")?.to_string(),
            Preprocessed {
                condition: table.number(row, "condition")? as u8,
                role,
                t_end: table.number(row, "t_end")?,
            },
        );
    }
    Ok(out)
}

fn read_images(cfg: &PipelineConfig, id: &str) -> Result<Vec<TfaImage>> {
    let dir = tfa_dir(cfg, id);
    let entries = std::fs::read_dir(&dir).map_err(|_| {
        Error::Config(format!(
            "no spectrograms for bearing {id} in {}; run `vispro preprocess` first",
            dir.display()
        ))
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "vtfa"))
        .collect();
    files.sort();
    files.iter().map(|p| read_vtfa(p)).collect()
}

fn model_path(cfg: &PipelineConfig, condition: u8) -> PathBuf {
    cfg.out.join("models").join(format!("cond{condition}.vspr"))
}

fn cmd_train(cfg: &PipelineConfig, manifest: &DatasetManifest) -> Result<String> {
    let exec = Execution::default();
    let summary = read_summary(cfg)?;
    let mut report = String::new();
    for (cond, ids) in &manifest.train {
        let mut samples = Vec::new();
        let mut t_max: f64 = 0.0;
        for id in ids {
            let p = summary
                .get(id)
                .filter(|p| p.role == BearingRole::Train && p.condition == *cond)
                .ok_or_else(|| {
                    Error::Config(format!("bearing {id} is missing from the preprocess summary; rerun preprocess"))
                })?;
            samples.extend(label_images(&read_images(cfg, id)?, p.t_end));
            t_max = t_max.max(p.t_end);
        }
        let outcome = train_condition(&samples, t_max, cfg, exec)?;
        let path = model_path(cfg, *cond);
        save_model(&path, &outcome.model)?;
        let mut loss = String::from("epoch,mean_loss\n");
        for (e, l) in outcome.loss_history.iter().enumerate() {
            let _ = writeln!(loss, "{},{l:e}", e + 1);
        }
        write(&cfg.out.join("models").join(format!("cond{cond}_loss.csv")), loss)?;
        let _ = writeln!(
            report,
            "condition {cond}: {} samples, loss {:.6e} -> {:.6e}, model {}",
            samples.len(),
            outcome.loss_history.first().copied().unwrap_or(f64::NAN),
            outcome.loss_history.last().copied().unwrap_or(f64::NAN),
            path.display()
        );
    }
    if report.is_empty() {
        report.push_str("no training bearings in the manifest\n");
    }
    Ok(report)
}

fn predict_dir(cfg: &PipelineConfig, mode: Mode, id: &str) -> PathBuf {
    cfg.out.join("predict").join(mode.name()).join(id)
}

fn write_prediction(cfg: &PipelineConfig, p: &BearingPrediction) -> Result<()> {
    let dir = predict_dir(cfg, p.record.mode, &p.record.bearing);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let mut phase1 = String::from("t,rul\n");
    for (t, r) in &p.trajectory {
        let _ = writeln!(phase1, "{},{}", fmt6(*t), fmt6(*r));
    }
    write(&dir.join("phase1.csv"), phase1)?;
    write(&dir.join("record.csv"), p.record.to_csv())?;
    let mut series = vec![Series {
        name: "phase1".into(),
        color: "gray",
        dashed: true,
        points: p.trajectory.clone(),
    }];
    if let Some(out) = &p.phase2 {
        let mut post = String::from("t,mean,sd");
        for l in &cfg.levels {
            let _ = write!(post, ",lower{l},upper{l}");
        }
        post.push('\n');
        for q in &out.posterior {
            let _ = write!(post, "{},{},{}", fmt6(q.t), fmt6(q.mean), fmt6(q.sd));
            for b in &q.bounds {
                let _ = write!(post, ",{},{}", fmt6(b.lower), fmt6(b.upper));
            }
            post.push('\n');
        }
        write(&dir.join("posterior.csv"), post)?;
        save_gpr(&dir.join("model.gpr"), &out.model)?;
        series.push(Series {
            name: "mean".into(),
            color: "black",
            dashed: false,
            points: out.posterior.iter().map(|q| (q.t, q.mean)).collect(),
        });
        for (k, &level) in cfg.levels.iter().enumerate() {
            let color = ["#1f77b4", "#2ca02c", "#d62728"][k % 3];
            for (side, pick) in [("lower", true), ("upper", false)] {
                series.push(Series {
                    name: format!("{side}{level}"),
                    color,
                    dashed: false,
                    points: out
                        .posterior
                        .iter()
                        .filter_map(|q| {
                            q.bound(level).map(|b| (q.t, if pick { b.lower } else { b.upper }))
                        })
                        .collect(),
                });
            }
        }
    }
    let title = format!("Bearing {} RUL ({})", p.record.bearing, p.record.mode);
    write(&dir.join("plot.svg"), render(&title, "time (s)", "RUL (s)", &series))
}

fn cmd_predict(cfg: &PipelineConfig, manifest: &DatasetManifest, bearing: Option<&str>) -> Result<String> {
    let exec = Execution::default();
    let ids: Vec<String> = match bearing {
        Some(id) => {
            match manifest.find(id) {
                Some((_, BearingRole::Test)) => {}
                Some(_) => return Err(Error::Config(format!("bearing {id} is a training bearing"))),
                None => return Err(Error::Config(format!("bearing {id} is not listed in the manifest"))),
            }
            vec![id.to_string()]
        }
        None => manifest.test_bearings(),
    };
    let mut models = BTreeMap::new();
    let mut report = String::new();
    for id in ids {
        let (cond, _) = manifest.find(&id).expect("listed");
        if !models.contains_key(&cond) {
            let path = model_path(cfg, cond);
            if !path.exists() {
                return Err(Error::Config(format!(
                    "no trained model for condition {cond} at {}; run `vispro train` first",
                    path.display()
                )));
            }
            models.insert(cond, crate::dataio::load_model(&path)?);
        }
        let images = read_images(cfg, &id)?;
        let trajectory = trajectory_from_images(&models[&cond], &images, exec)?;
        let p = predict_from_trajectory(&id, trajectory, manifest.truth.get(&id).copied(), cfg.mode, cfg)?;
        write_prediction(cfg, &p)?;
        let r = &p.record;
        let _ = write!(report, "{} [{}] t_c={} y_hat={}", r.bearing, r.mode, fmt6(r.t_c), fmt6(r.y_hat));
        if let Some(y) = r.y {
            let _ = write!(report, " y={}", fmt6(y));
        }
        if let Some(b) = r.bounds.iter().find(|b| b.level == ConfidenceLevel::P90) {
            let _ = write!(report, " 90%=[{}; {}]", fmt6(b.lower), fmt6(b.upper));
        }
        if let Some(t) = r.failure_time {
            let _ = write!(report, " failure_time={}", fmt6(t));
        }
        if r.horizon_exceeded {
            report.push_str(" horizon_exceeded");
        }
        report.push('\n');
    }
    Ok(report)
}

fn score_line(label: &str, s: &Score) -> String {
    format!(
        "{label}: n={} Score={:.4} Mean={:.4} STD={:.4} Mean|Er|={:.4}\n",
        s.n, s.score, s.mean_er, s.std_er, s.mean_abs_er
    )
}

fn evaluate_results(cfg: &PipelineConfig, label: &str, results: &[BearingResult]) -> Result<(Score, String)> {
    let dir = cfg.out.join("evaluate");
    write(&dir.join(format!("{label}_table.csv")), results_table_csv(results)?)?;
    let with_bounds: Vec<ConfidenceLevel> = cfg
        .levels
        .iter()
        .copied()
        .filter(|&l| results.iter().all(|r| r.bound(l).is_some()))
        .collect();
    let mut report = String::new();
    if !with_bounds.is_empty() {
        let rows = with_bounds
            .iter()
            .map(|&l| coverage_report(results, l))
            .collect::<Result<Vec<_>>>()?;
        write(&dir.join(format!("{label}_coverage.csv")), coverage_csv(&rows))?;
        for c in &rows {
            let _ = writeln!(
                report,
                "  {}% intervals: mean width {:.3}, invalid {}/{}",
                c.level, c.mean_width, c.invalid, c.count
            );
        }
    }
    let errors = results.iter().map(|r| r.percent_error()).collect::<Result<Vec<_>>>()?;
    let score = aggregate_errors(&errors)?;
    Ok((score.clone(), score_line(label, &score) + &report))
}

fn mode_records(cfg: &PipelineConfig, manifest: &DatasetManifest, mode: Mode) -> Result<Vec<BearingResult>> {
    manifest
        .test_bearings()
        .iter()
        .map(|id| {
            let path = predict_dir(cfg, mode, id).join("record.csv");
            if !path.exists() {
                return Err(Error::Config(format!(
                    "missing {mode} prediction for bearing {id} ({}); run `vispro predict --mode {mode}`",
                    path.display()
                )));
            }
            PredictionRecord::read(&path)?.to_result()
        })
        .collect()
}

fn cmd_evaluate(cfg: &PipelineConfig, manifest: &DatasetManifest, explicit_mode: bool) -> Result<String> {
    if manifest.test_bearings().is_empty() {
        return Err(Error::Input("the manifest lists no testing bearings".into()));
    }
    let mut report = String::new();
    let mut scores = Vec::new();
    for mode in Mode::ALL {
        let records = mode_records(cfg, manifest, mode);
        let results = match records {
            Ok(r) => r,
            Err(e) if mode == cfg.mode => return Err(e),
            Err(_) => continue,
        };
        if explicit_mode && mode != cfg.mode {
            continue;
        }
        let (score, text) = evaluate_results(cfg, mode.name(), &results)?;
        let invalid90 = coverage_report(&results, ConfidenceLevel::P90).ok().map(|c| c.invalid);
        report.push_str(&text);
        scores.push((mode, score, invalid90));
    }
    if scores.len() > 1 {
        let mut cmp = String::from("mode,n,score,mean_er,std_er,mean_abs_er,invalid90\n");
        for (mode, s, inv) in &scores {
            let _ = writeln!(
                cmp,
                "{mode},{},{},{},{},{},{}",
                s.n,
                fmt6(s.score),
                fmt6(s.mean_er),
                fmt6(s.std_er),
                fmt6(s.mean_abs_er),
                inv.map(|v| v.to_string()).unwrap_or_default()
            );
        }
        write(&cfg.out.join("evaluate").join("comparison.csv"), &cmp)?;
        report.push_str(&cmp);
    }
    Ok(report)
}

fn cmd_evaluate_records(cfg: &PipelineConfig, path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table = Table::parse(&text, path)?;
    if table.rows().is_empty() {
        return Err(Error::Input(format!("{} has no result rows", path.display())));
    }
    if table.has("y") && table.has("y_hat") {
        let results = table
            .rows()
            .iter()
            .map(|row| {
                Ok(BearingResult {
                    bearing: table.text(row, "bearing")?.to_string(),
                    t_c: if table.has("t_c") { table.number(row, "t_c")? } else { 0.0 },
                    y: table.number(row, "y")?,
                    y_hat: table.number(row, "y_hat")?,
                    bounds: table.bounds(row)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(evaluate_results(cfg, "records", &results)?.1);
    }
    if !table.has("Er") {
        return Err(Error::Input(format!(
            "{} needs columns y and y_hat, or Er",
            path.display()
        )));
    }
    let mut csv = String::from("bearing,Er,A\n");
    let mut errors = Vec::new();
    for row in table.rows() {
        let er = table.number(row, "Er")?;
        let bearing = if table.has("bearing") { table.text(row, "bearing")? } else { "" };
        let _ = writeln!(csv, "{bearing},{},{}", fmt6(er), fmt6(accuracy_score(er)));
        errors.push(er);
    }
    let score = aggregate_errors(&errors)?;
    let _ = writeln!(csv, "Mean,{},", fmt6(score.mean_er));
    let _ = writeln!(csv, "STD,{},", fmt6(score.std_er));
    let _ = writeln!(csv, "Score,,{}", fmt6(score.score));
    write(&cfg.out.join("evaluate").join("records_table.csv"), csv)?;
    Ok(score_line("records", &score))
}
