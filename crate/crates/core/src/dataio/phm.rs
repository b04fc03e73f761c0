use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::manifest::{Channel, DatasetManifest};
use super::run::BearingRun;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::tfa::{snapshot_len, VibrationSnapshot};

/// One parsed record row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRow {
    /// Seconds since midnight.
    pub time_of_day: f64,
    pub horizontal: f64,
    pub vertical: f64,
}

/// Maps the fields of one CSV row onto a [`RawRow`].
pub trait RowAdapter: Sync {
    fn parse_row(&self, fields: &[&str]) -> std::result::Result<RawRow, String>;
}

/// `hour, minute, second, microsecond, horizontal, vertical`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Phm12Columns;

impl RowAdapter for Phm12Columns {
    fn parse_row(&self, fields: &[&str]) -> std::result::Result<RawRow, String> {
        if fields.len() != 6 {
            return Err(format!("expected 6 fields, found {}", fields.len()));
        }
        let mut v = [0.0; 6];
        for (i, f) in fields.iter().enumerate() {
            v[i] = f
                .trim()
                .parse()
                .map_err(|_| format!("field {} is not a number: {:?}", i + 1, f.trim()))?;
        }
        Ok(RawRow {
            time_of_day: v[0] * 3600.0 + v[1] * 60.0 + v[2] + v[3] * 1e-6,
            horizontal: v[4],
            vertical: v[5],
        })
    }
}

pub fn bearing_dir(root: &Path, id: &str) -> PathBuf {
    root.join(format!("Bearing{id}"))
}

/// Parses one record file. Fields may be separated by `,` or `;`.
pub fn parse_record(path: &Path, text: &str, adapter: &dyn RowAdapter) -> Result<Vec<RawRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split([',', ';']).collect();
        let row = adapter.parse_row(&fields).map_err(|msg| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        })?;
        rows.push(row);
    }
    Ok(rows)
}

fn record_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("acc_") && name.ends_with(".csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every `acc_*.csv` record of a bearing in filename order. Snapshot
/// times are placed on the cadence grid after checking the wall-clock
/// spacing between records.
pub fn load_bearing(manifest: &DatasetManifest, id: &str, adapter: &dyn RowAdapter, exec: Execution) -> Result<BearingRun> {
    let (condition, role) = manifest
        .find(id)
        .ok_or_else(|| Error::Config(format!("bearing {id} is not listed in the manifest")))?;
    let dir = bearing_dir(&manifest.root, id);
    let files = record_files(&dir)?;
    if files.is_empty() {
        return Err(Error::Ingestion(format!("no acc_*.csv records in {}", dir.display())));
    }
    let expected = snapshot_len(manifest.sample_rate);
    let parsed = exec.map_slice(&files, |path| -> Result<(f64, Vec<f64>)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rows = parse_record(path, &text, adapter)?;
        if rows.len() != expected {
            return Err(Error::Ingestion(format!(
                "{} has {} samples, expected {expected}",
                path.display(),
                rows.len()
            )));
        }
        let samples = rows
            .iter()
            .map(|r| match manifest.channel {
                Channel::Horizontal => r.horizontal,
                Channel::Vertical => r.vertical,
            })
            .collect();
        Ok((rows[0].time_of_day, samples))
    });
    let mut snapshots = Vec::with_capacity(files.len());
    let mut prev_clock: Option<f64> = None;
    for (i, (res, path)) in parsed.into_iter().zip(&files).enumerate() {
        let (clock, samples) = res?;
        if let Some(prev) = prev_clock {
            let dt = (clock - prev).rem_euclid(86_400.0);
            if (dt - manifest.cadence).abs() > 1.0 {
                return Err(Error::Ingestion(format!(
                    "{} starts {dt:.3}s after the previous record, expected {}s",
                    path.display(),
                    manifest.cadence
                )));
            }
        }
        prev_clock = Some(clock);
        snapshots.push(VibrationSnapshot::new(i as f64 * manifest.cadence, samples, manifest.sample_rate)?);
    }
    BearingRun::new(
        id,
        condition,
        snapshots,
        role == super::manifest::BearingRole::Train,
        manifest.cadence,
    )
}

/// Writes a run as PHM12-style records under `bearing_dir(root, id)`.
/// The recording starts at 09:00:00; the vertical column carries the
/// horizontal signal scaled by −0.5.
pub fn write_bearing(root: &Path, run: &BearingRun) -> Result<()> {
    let dir = bearing_dir(root, &run.id);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (i, snap) in run.snapshots.iter().enumerate() {
        let mut text = String::with_capacity(snap.samples.len() * 48);
        for (j, &x) in snap.samples.iter().enumerate() {
            let clock = 9.0 * 3600.0 + snap.timestamp + j as f64 / snap.sample_rate;
            let whole = clock.floor();
            let us = ((clock - whole) * 1e6).round();
            let whole = whole as u64;
            let _ = writeln!(
                text,
                "{},{},{},{},{:.6},{:.6}",
                (whole / 3600) % 24,
                (whole / 60) % 60,
                whole % 60,
                us,
                x,
                -0.5 * x
            );
        }
        let path = dir.join(format!("acc_{:05}.csv", i + 1));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_separators() {
        let rows = parse_record(Path::new("a.csv"), "9,0,1,500000,0.25,-1\n9;0;1;500039;0.5;2\n", &Phm12Columns).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].time_of_day, 32401.5);
        assert_eq!(rows[1].vertical, 2.0);
    }

    #[test]
    fn malformed_row_names_file_and_line() {
        let err = parse_record(Path::new("acc_00003.csv"), "9,0,1,0,0.1,0.2\n9,0,1,0,abc,0.2\n", &Phm12Columns)
            .unwrap_err();
        match err {
            Error::Parse { path, line, .. } => {
                assert_eq!(path, PathBuf::from("acc_00003.csv"));
                assert_eq!(line, 2);
            }
            e => panic!("unexpected {e:?}"),
        }
    }
}
