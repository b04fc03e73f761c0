use crate::error::{Error, Result};
use crate::tfa::VibrationSnapshot;

/// How a recording ends: at failure (training) or censored (testing).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunEnd {
    Failure(f64),
    Truncated(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BearingRun {
    pub id: String,
    pub condition: u8,
    pub snapshots: Vec<VibrationSnapshot>,
    pub end: RunEnd,
}

impl BearingRun {
    /// Validates ordering and cadence, and derives the end time from the
    /// last snapshot.
    pub fn new(id: &str, condition: u8, snapshots: Vec<VibrationSnapshot>, failed: bool, cadence: f64) -> Result<Self> {
        let Some(last) = snapshots.last() else {
            return Err(Error::Ingestion(format!("bearing {id} has no snapshots")));
        };
        for w in snapshots.windows(2) {
            let dt = w[1].timestamp - w[0].timestamp;
            if (dt - cadence).abs() > 1.0 {
                return Err(Error::Ingestion(format!(
                    "bearing {id}: snapshot at t={}s follows t={}s, expected a {cadence}s cadence",
                    w[1].timestamp, w[0].timestamp
                )));
            }
        }
        let end = if failed {
            RunEnd::Failure(last.timestamp)
        } else {
            RunEnd::Truncated(last.timestamp)
        };
        Ok(BearingRun {
            id: id.to_string(),
            condition,
            snapshots,
            end,
        })
    }

    pub fn failure_time(&self) -> Option<f64> {
        match self.end {
            RunEnd::Failure(t) => Some(t),
            RunEnd::Truncated(_) => None,
        }
    }

    pub fn end_time(&self) -> f64 {
        match self.end {
            RunEnd::Failure(t) | RunEnd::Truncated(t) => t,
        }
    }

    /// Censors a run-to-failure recording at `t_c`, returning the truncated
    /// run and the true RUL at truncation.
    pub fn truncate(&self, t_c: f64) -> Result<(BearingRun, f64)> {
        let t_f = self
            .failure_time()
            .ok_or_else(|| Error::Input(format!("bearing {} is already truncated", self.id)))?;
        let snapshots: Vec<_> = self.snapshots.iter().filter(|s| s.timestamp <= t_c).cloned().collect();
        let Some(last) = snapshots.last() else {
            return Err(Error::Input(format!("truncation time {t_c}s precedes the first snapshot")));
        };
        let t_c = last.timestamp;
        if t_c >= t_f {
            return Err(Error::Input(format!("truncation time {t_c}s is not before failure at {t_f}s")));
        }
        let run = BearingRun {
            id: self.id.clone(),
            condition: self.condition,
            snapshots,
            end: RunEnd::Truncated(t_c),
        };
        Ok((run, t_f - t_c))
    }
}

/// Linear RUL labels `(t_i, t_f − t_i)` for a run-to-failure recording.
pub fn label_rul(run: &BearingRun) -> Result<Vec<(f64, f64)>> {
    let t_f = run
        .failure_time()
        .ok_or_else(|| Error::Input(format!("bearing {} is truncated and cannot be labeled", run.id)))?;
    Ok(run.snapshots.iter().map(|s| (s.timestamp, t_f - s.timestamp)).collect())
}
