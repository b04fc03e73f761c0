use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nsgpr::{Bound, ConfidenceLevel};
use crate::scoring::{fmt6, BearingResult};

use super::config::Mode;

/// The per-bearing outcome at truncation: ŷ, y when known, interval
/// bounds and the predicted failure time.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub bearing: String,
    pub mode: Mode,
    pub t_c: f64,
    pub y_hat: f64,
    pub y: Option<f64>,
    /// Absent in phase1-only mode or when the horizon was exceeded.
    pub failure_time: Option<f64>,
    pub horizon_exceeded: bool,
    pub bounds: Vec<Bound>,
}

impl PredictionRecord {
    pub fn to_result(&self) -> Result<BearingResult> {
        let y = self
            .y
            .ok_or_else(|| Error::Input(format!("ground truth is unknown for bearing {}", self.bearing)))?;
        Ok(BearingResult {
            bearing: self.bearing.clone(),
            t_c: self.t_c,
            y,
            y_hat: self.y_hat,
            bounds: self.bounds.clone(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bearing,mode,t_c,y_hat,y,failure_time,horizon_exceeded");
        for b in &self.bounds {
            let _ = write!(s, ",lower{0},upper{0}", b.level);
        }
        let opt = |v: Option<f64>| v.map(fmt6).unwrap_or_default();
        let _ = write!(
            s,
            "\n{},{},{},{},{},{},{}",
            self.bearing,
            self.mode,
            fmt6(self.t_c),
            fmt6(self.y_hat),
            opt(self.y),
            opt(self.failure_time),
            self.horizon_exceeded
        );
        for b in &self.bounds {
            let _ = write!(s, ",{},{}", fmt6(b.lower), fmt6(b.upper));
        }
        s.push('\n');
        s
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let table = Table::parse(text, path)?;
        if table.rows.len() != 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 2,
                msg: format!("expected one record row, found {}", table.rows.len()),
            });
        }
        let row = &table.rows[0];
        Ok(PredictionRecord {
            bearing: table.text(row, "bearing")?.to_string(),
            mode: table.text(row, "mode")?.parse()?,
            t_c: table.number(row, "t_c")?,
            y_hat: table.number(row, "y_hat")?,
            y: table.optional(row, "y")?,
            failure_time: table.optional(row, "failure_time")?,
            horizon_exceeded: table.text(row, "horizon_exceeded")? == "true",
            bounds: table.bounds(row)?,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, path)
    }
}

/// A header-addressed CSV table.
pub(crate) struct Table<'a> {
    path: &'a Path,
    header: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

impl<'a> Table<'a> {
    pub fn parse(text: &str, path: &'a Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "empty file".into(),
        })?;
        let header: Vec<String> = head.split(',').map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, l) in lines {
            let fields: Vec<String> = l.split(',').map(|f| f.trim().to_string()).collect();
            if fields.len() != header.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("expected {} fields, found {}", header.len(), fields.len()),
                });
            }
            rows.push((i + 1, fields));
        }
        Ok(Table { path, header, rows })
    }

    pub fn rows(&self) -> &[(usize, Vec<String>)] {
        &self.rows
    }

    pub fn has(&self, col: &str) -> bool {
        self.header.iter().any(|h| h == col)
    }

    fn err(&self, line: usize, msg: String) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg,
        }
    }

    pub fn text<'r>(&self, row: &'r (usize, Vec<String>), col: &str) -> Result<&'r str> {
        let i = self
            .header
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| self.err(1, format!("missing column {col}")))?;
        Ok(&row.1[i])
    }

    pub fn optional(&self, row: &(usize, Vec<String>), col: &str) -> Result<Option<f64>> {
        let s = self.text(row, col)?;
        if s.is_empty() {
            return Ok(None);
        }
        s.parse()
            .map(Some)
            .map_err(|_| self.err(row.0, format!("column {col}: {s:?} is not a number")))
    }

    pub fn number(&self, row: &(usize, Vec<String>), col: &str) -> Result<f64> {
        self.optional(row, col)?
            .ok_or_else(|| self.err(row.0, format!("column {col} is empty")))
    }

    /// Every `lowerNN`/`upperNN` column pair with a value on this row.
    pub fn bounds(&self, row: &(usize, Vec<String>)) -> Result<Vec<Bound>> {
        let mut out = Vec::new();
        for level in ConfidenceLevel::ALL {
            let (lo, hi) = (format!("lower{level}"), format!("upper{level}"));
            if !self.has(&lo) || !self.has(&hi) {
                continue;
            }
            if let (Some(lower), Some(upper)) = (self.optional(row, &lo)?, self.optional(row, &hi)?) {
                out.push(Bound { level, lower, upper });
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip() {
        let r = PredictionRecord {
            bearing: "1_6".into(),
            mode: Mode::Full,
            t_c: 23010.0,
            y_hat: 1400.0,
            y: Some(1460.0),
            failure_time: Some(24410.5),
            horizon_exceeded: false,
            bounds: vec![Bound {
                level: ConfidenceLevel::P90,
                lower: 1310.0,
                upper: 1500.0,
            }],
        };
        assert_eq!(PredictionRecord::from_csv(&r.to_csv(), Path::new("r.csv")).unwrap(), r);
    }

    #[test]
    fn phase1_record_has_no_interval_columns() {
        let r = PredictionRecord {
            bearing: "x".into(),
            mode: Mode::Phase1Only,
            t_c: 10.0,
            y_hat: 5.0,
            y: None,
            failure_time: None,
            horizon_exceeded: false,
            bounds: vec![],
        };
        let csv = r.to_csv();
        assert!(!csv.contains("lower"));
        assert_eq!(PredictionRecord::from_csv(&csv, Path::new("r.csv")).unwrap(), r);
    }
}
