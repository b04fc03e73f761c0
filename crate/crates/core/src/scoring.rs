//! Prognostic accuracy metrics: percent error, the asymmetric accuracy
//! score (early predictions are penalized less than late ones), aggregate
//! reporting and confidence-interval coverage.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::nsgpr::{Bound, ConfidenceLevel};

#[derive(Debug, Clone, PartialEq)]
pub struct BearingResult {
    pub bearing: String,
    /// Truncation time, seconds.
    pub t_c: f64,
    /// Ground-truth RUL at truncation, seconds.
    pub y: f64,
    /// Predicted RUL at truncation, seconds.
    pub y_hat: f64,
    pub bounds: Vec<Bound>,
}

impl BearingResult {
    pub fn bound(&self, level: ConfidenceLevel) -> Option<&Bound> {
        self.bounds.iter().find(|b| b.level == level)
    }

    pub fn percent_error(&self) -> Result<f64> {
        percent_error(self.y, self.y_hat)
    }
}

/// `(y − ŷ) / y × 100`. Negative means the RUL was over-predicted.
pub fn percent_error(y: f64, y_hat: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::Input(format!("ground-truth RUL must be positive, got {y}")));
    }
    Ok((y - y_hat) / y * 100.0)
}

/// Halves every 5 % of over-prediction and every 20 % of under-prediction.
pub fn accuracy_score(er: f64) -> f64 {
    let ln_half = 0.5f64.ln();
    if er <= 0.0 {
        (-ln_half * er / 5.0).exp()
    } else {
        (ln_half * er / 20.0).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub n: usize,
    /// Mean accuracy score.
    pub score: f64,
    /// Mean of the signed percent errors.
    pub mean_er: f64,
    /// Population standard deviation of the signed percent errors.
    pub std_er: f64,
    pub mean_abs_er: f64,
}

pub fn aggregate_errors(errors: &[f64]) -> Result<Score> {
    if errors.is_empty() {
        return Err(Error::Input("cannot score an empty result list".into()));
    }
    let n = errors.len() as f64;
    let score = errors.iter().map(|&e| accuracy_score(e)).sum::<f64>() / n;
    let mean_er = errors.iter().sum::<f64>() / n;
    let std_er = (errors.iter().map(|e| (e - mean_er).powi(2)).sum::<f64>() / n).sqrt();
    let mean_abs_er = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
    Ok(Score {
        n: errors.len(),
        score,
        mean_er,
        std_er,
        mean_abs_er,
    })
}

pub fn aggregate_score(results: &[BearingResult]) -> Result<Score> {
    let errors = results
        .iter()
        .map(BearingResult::percent_error)
        .collect::<Result<Vec<_>>>()?;
    aggregate_errors(&errors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub level: ConfidenceLevel,
    pub count: usize,
    pub mean_width: f64,
    /// Results whose truth falls outside the closed interval.
    pub invalid: usize,
}

pub fn coverage_report(results: &[BearingResult], level: ConfidenceLevel) -> Result<Coverage> {
    if results.is_empty() {
        return Err(Error::Input("cannot report coverage of an empty result list".into()));
    }
    let mut width = 0.0;
    let mut invalid = 0;
    for r in results {
        let b = r
            .bound(level)
            .ok_or_else(|| Error::Input(format!("bearing {} has no {level}% interval", r.bearing)))?;
        width += b.upper - b.lower;
        if r.y < b.lower || r.y > b.upper {
            invalid += 1;
        }
    }
    Ok(Coverage {
        level,
        count: results.len(),
        mean_width: width / results.len() as f64,
        invalid,
    })
}

/// Per-bearing table with trailing Mean/STD/Score rows:
/// `bearing,t_c,y,y_hat,Er,A,lower90,upper90`.
pub fn results_table_csv(results: &[BearingResult]) -> Result<String> {
    let score = aggregate_score(results)?;
    let mut s = String::from("bearing,t_c,y,y_hat,Er,A,lower90,upper90\n");
    for r in results {
        let er = r.percent_error()?;
        let (lo, hi) = r
            .bound(ConfidenceLevel::P90)
            .map_or((String::new(), String::new()), |b| (fmt6(b.lower), fmt6(b.upper)));
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{lo},{hi}",
            r.bearing,
            fmt6(r.t_c),
            fmt6(r.y),
            fmt6(r.y_hat),
            fmt6(er),
            fmt6(accuracy_score(er))
        );
    }
    let _ = writeln!(s, "Mean,,,,{},,,", fmt6(score.mean_er));
    let _ = writeln!(s, "STD,,,,{},,,", fmt6(score.std_er));
    let _ = writeln!(s, "Score,,,,,{},,", fmt6(score.score));
    Ok(s)
}

pub fn coverage_csv(rows: &[Coverage]) -> String {
    let mut s = String::from("level,count,mean_width,invalid\n");
    for c in rows {
        let _ = writeln!(s, "{},{},{},{}", c.level, c.count, fmt6(c.mean_width), c.invalid);
    }
    s
}

pub(crate) fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(y: f64, y_hat: f64, lo: f64, hi: f64) -> BearingResult {
        BearingResult {
            bearing: "x".into(),
            t_c: 100.0,
            y,
            y_hat,
            bounds: vec![Bound {
                level: ConfidenceLevel::P90,
                lower: lo,
                upper: hi,
            }],
        }
    }

    #[test]
    fn percent_error_cases() {
        assert!((percent_error(1460.0, 1400.0).unwrap() - 4.109589).abs() < 1e-6);
        assert_eq!(percent_error(5.0, 5.0).unwrap(), 0.0);
        assert_eq!(percent_error(100.0, 150.0).unwrap(), -50.0);
        assert!(matches!(percent_error(0.0, 1.0), Err(Error::Input(_))));
    }

    #[test]
    fn accuracy_half_lives() {
        assert_eq!(accuracy_score(0.0), 1.0);
        assert!((accuracy_score(-5.0) - 0.5).abs() < 1e-15);
        assert!((accuracy_score(20.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn aggregate_cases() {
        assert!(aggregate_score(&[]).is_err());
        let perfect = vec![result(10.0, 10.0, 9.0, 11.0); 3];
        assert_eq!(aggregate_score(&perfect).unwrap().score, 1.0);
        let early = aggregate_score(&[result(100.0, 105.0, 0.0, 1.0)]).unwrap();
        assert!((early.score - 0.5).abs() < 1e-12);
    }

    #[test]
    fn coverage_boundary_is_closed() {
        let c = coverage_report(&[result(10.0, 9.0, 8.0, 10.0)], ConfidenceLevel::P90).unwrap();
        assert_eq!((c.invalid, c.count), (0, 1));
        assert_eq!(c.mean_width, 2.0);
        assert!(coverage_report(&[result(10.0, 9.0, 8.0, 10.0)], ConfidenceLevel::P80).is_err());
    }
}
