//! Confidence intervals and failure-time extrapolation.

use std::fmt;
use std::str::FromStr;

use super::gp::GprModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConfidenceLevel {
    P80,
    P90,
    P95,
}

impl ConfidenceLevel {
    pub const ALL: [ConfidenceLevel; 3] = [ConfidenceLevel::P80, ConfidenceLevel::P90, ConfidenceLevel::P95];

    /// Two-sided standard-normal quantile.
    pub fn z(self) -> f64 {
        match self {
            ConfidenceLevel::P80 => 1.2816,
            ConfidenceLevel::P90 => 1.6449,
            ConfidenceLevel::P95 => 1.9600,
        }
    }

    pub fn percent(self) -> u32 {
        match self {
            ConfidenceLevel::P80 => 80,
            ConfidenceLevel::P90 => 90,
            ConfidenceLevel::P95 => 95,
        }
    }

    pub fn from_fraction(level: f64) -> Result<Self> {
        match (level * 100.0).round() as i64 {
            80 => Ok(ConfidenceLevel::P80),
            90 => Ok(ConfidenceLevel::P90),
            95 => Ok(ConfidenceLevel::P95),
            _ => Err(Error::Parameter(format!("unsupported confidence level {level}"))),
        }
    }

    /// Parses a comma list such as `80,90,95`.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        let mut v = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse())
            .collect::<Result<Vec<Self>>>()?;
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(Error::Config("no confidence levels given".into()));
        }
        Ok(v)
    }
}

impl FromStr for ConfidenceLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_end_matches('%') {
            "80" | "0.8" | "0.80" => Ok(ConfidenceLevel::P80),
            "90" | "0.9" | "0.90" => Ok(ConfidenceLevel::P90),
            "95" | "0.95" => Ok(ConfidenceLevel::P95),
            other => Err(Error::Parameter(format!("unsupported confidence level '{other}'"))),
        }
    }
}

impl fmt::Display for ConfidenceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.percent())
    }
}

/// `mu ± z·sigma`.
pub fn confidence_interval(mu: f64, sigma: f64, level: ConfidenceLevel) -> Result<(f64, f64)> {
    if !(sigma >= 0.0) {
        return Err(Error::Parameter(format!("sigma must be nonnegative, got {sigma}")));
    }
    let half = level.z() * sigma;
    Ok((mu - half, mu + half))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bound {
    pub level: ConfidenceLevel,
    pub lower: f64,
    pub upper: f64,
}

/// Posterior RUL at one query time, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct RulPrediction {
    pub t: f64,
    pub mean: f64,
    pub sd: f64,
    pub bounds: Vec<Bound>,
}

impl RulPrediction {
    pub fn bound(&self, level: ConfidenceLevel) -> Option<&Bound> {
        self.bounds.iter().find(|b| b.level == level)
    }
}

impl GprModel {
    pub fn predict(&self, t: f64, levels: &[ConfidenceLevel]) -> Result<RulPrediction> {
        let (mean, sd) = self.posterior_seconds(t)?;
        let bounds = levels
            .iter()
            .map(|&level| {
                let (lower, upper) = confidence_interval(mean, sd, level)?;
                Ok(Bound { level, lower, upper })
            })
            .collect::<Result<_>>()?;
        Ok(RulPrediction { t, mean, sd, bounds })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FailureOutcome {
    /// Posterior mean RUL reaches zero at `time`.
    Failure { time: f64, rul_at_truncation: f64 },
    /// No crossing before `t_c + horizon`; `mean_at_horizon` is the mean there.
    HorizonExceeded { mean_at_horizon: f64, rul_at_truncation: f64 },
}

impl FailureOutcome {
    pub fn rul_at_truncation(&self) -> f64 {
        match *self {
            FailureOutcome::Failure { rul_at_truncation, .. }
            | FailureOutcome::HorizonExceeded { rul_at_truncation, .. } => rul_at_truncation,
        }
    }
}

const BISECTION_RESOLUTION: f64 = 0.1;

/// First time at or after `t_c` where the posterior mean RUL is ≤ 0: a grid
/// scan with spacing `step`, refined by bisection to 0.1 s.
pub fn predict_failure_time(model: &GprModel, t_c: f64, horizon: f64, step: f64) -> Result<FailureOutcome> {
    if !(step > 0.0) || !(horizon >= 0.0) {
        return Err(Error::Parameter("step must be positive and horizon nonnegative".into()));
    }
    let mean = |t: f64| model.posterior_seconds(t).map(|p| p.0);
    let at_tc = mean(t_c)?;
    if at_tc <= 0.0 {
        return Ok(FailureOutcome::Failure {
            time: t_c,
            rul_at_truncation: at_tc,
        });
    }
    let end = t_c + horizon;
    let mut prev = t_c;
    loop {
        let t = (prev + step).min(end);
        if t <= prev {
            break;
        }
        if mean(t)? <= 0.0 {
            let (mut lo, mut hi) = (prev, t);
            while hi - lo > BISECTION_RESOLUTION {
                let mid = 0.5 * (lo + hi);
                if mean(mid)? <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(FailureOutcome::Failure {
                time: hi,
                rul_at_truncation: at_tc,
            });
        }
        prev = t;
    }
    Ok(FailureOutcome::HorizonExceeded {
        mean_at_horizon: mean(end)?,
        rul_at_truncation: at_tc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_collapses() {
        for l in ConfidenceLevel::ALL {
            assert_eq!(confidence_interval(5.0, 0.0, l).unwrap(), (5.0, 5.0));
        }
    }

    #[test]
    fn intervals_nest() {
        let (a, b) = confidence_interval(1400.0, 50.0, ConfidenceLevel::P80).unwrap();
        let (c, d) = confidence_interval(1400.0, 50.0, ConfidenceLevel::P90).unwrap();
        let (e, f) = confidence_interval(1400.0, 50.0, ConfidenceLevel::P95).unwrap();
        assert!(e < c && c < a && b < d && d < f);
    }

    #[test]
    fn level_parsing() {
        assert_eq!(ConfidenceLevel::parse_list("95,80,90").unwrap(), ConfidenceLevel::ALL.to_vec());
        assert!("85".parse::<ConfidenceLevel>().is_err());
        assert!(ConfidenceLevel::from_fraction(0.5).is_err());
        assert_eq!(ConfidenceLevel::from_fraction(0.9).unwrap(), ConfidenceLevel::P90);
        assert!(confidence_interval(0.0, -1.0, ConfidenceLevel::P90).is_err());
    }
}
